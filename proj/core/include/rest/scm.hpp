#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rest/dataset.hpp"
#include "rest/kv_config.hpp"
#include "rest/rng.hpp"

namespace rest {

/// Discrete structural model over (G, u, s, v, e, r):
///   G ~ P(G), u ~ P(u|G), s ~ P(s), v ~ P(v), e ~ P(e=1|u,v,s), r ~ P(r|u,v,s,e).
/// Ratings take values 1..r_levels; the other variables take values 0..size-1.
/// Tables are flat and row-major in the order their conditioning variables are listed.
struct ScmSpec {
  int g_size = 1;
  int u_size = 1;
  int s_size = 1;
  int v_size = 1;
  int r_levels = 5;

  std::vector<double> p_g;          // [g]
  std::vector<double> p_u_given_g;  // [g][u]
  std::vector<double> p_s;          // [s]
  std::vector<double> p_v;          // [v]
  std::vector<double> p_e1;         // [u][v][s]
  std::vector<double> p_r_e0;       // [u][v][s][r]
  std::vector<double> p_r_e1;       // [u][v][s][r]

  // Generation settings.
  std::int64_t users = 200;
  std::int64_t items = 100;
  std::int64_t tuples = 20000;
  std::int64_t segment_length = 2000;  // tuples per regime segment
  double p_in = 0.05;                  // edge probability within a u-type
  double p_out = 0.002;                // edge probability across u-types
  std::uint64_t seed = 1;

  double u_given_g(int g, int u) const { return p_u_given_g[static_cast<std::size_t>(g * u_size + u)]; }
  double e1(int u, int v, int s) const { return p_e1[static_cast<std::size_t>((u * v_size + v) * s_size + s)]; }
  /// P(r = level | u, v, s, e) with level in 1..r_levels.
  double r_given(int u, int v, int s, int e, int level) const;

  /// Shapes, probabilities in [0, 1] and row sums within 1e-12.
  void validate() const;

  void to_kv(KeyValueConfig& kv) const;
  static ScmSpec from_kv(const KeyValueConfig& kv);
  static ScmSpec load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// Random spec with Dirichlet(1) rows and uniform exposure probabilities.
ScmSpec random_scm_spec(Rng& rng, int g_size, int u_size, int s_size, int v_size, int r_levels);

/// Exposure independent of (u, s) and ratings unaffected by e; selection bias is exactly 0.
ScmSpec inert_scm_spec();

/// High s-regimes both raise exposure and raise ratings, so the exposed log over-reports high ratings.
ScmSpec biased_scm_spec();

/// Regime-switching spec used for synthetic training data: regime s promotes item type s,
/// which is then exposed far more often and rated higher.
ScmSpec regime_scm_spec();

struct ZeroCell {
  std::string what;  // name of the conditioning event with zero probability
  std::vector<int> values;
};

struct InterventionalResult {
  /// P(r | G, v, do(e=1)) by enumerating the graph with e forced to 1.
  std::vector<double> enumeration;
  /// Sum over (u, s) of P(r | G, u, v, s, e=1) P(u | G) P(s), every factor read off the observational joint.
  std::vector<double> adjustment;
  /// Conditioning cells with zero observational mass. Their terms are left out of the adjustment.
  std::vector<ZeroCell> zero_cells;

  bool comparable() const { return zero_cells.empty(); }
  double max_abs_difference() const;
};

InterventionalResult exact_interventional(const ScmSpec& spec, int g, int v);

/// P(r | G, v, e=1) from the observational joint. Throws ValidationError when P(G, v, e=1) = 0.
std::vector<double> observational_rating(const ScmSpec& spec, int g, int v);

/// Total-variation distance between the observational and interventional rating distributions.
double measure_selection_bias(const ScmSpec& spec, int g, int v);

struct ScmTuple {
  int g = 0, u = 0, s = 0, v = 0, e = 0, r = 1;
};

/// i.i.d. ancestral draws of the full tuple.
std::vector<ScmTuple> sample_tuples(const ScmSpec& spec, std::size_t n, Rng& rng);

struct LedgerEntry {
  int user_type = 0;
  int regime = 0;
  std::int64_t segment = 0;
};

struct SyntheticDataset {
  Dataset dataset;                  // exposed tuples only, with timestamps
  std::vector<LedgerEntry> ledger;  // aligned 1:1 with dataset.interactions
  std::vector<int> user_group;      // G per user
  std::vector<int> user_type;       // u per user
  std::vector<int> item_type;       // v per item
  std::vector<int> segment_regime;  // s per segment
  std::size_t tuples_sampled = 0;
  std::size_t tuples_exposed = 0;       // e = 1 tuples before collapsing repeated pairs
  std::size_t duplicates_replaced = 0;  // exposed tuples superseded by a later tuple of the same pair

  /// Writes interactions.tsv, social.tsv and ledger.tsv in the loader formats.
  void save(const std::filesystem::path& dir) const;
};

/// Users, items and regime segments are drawn from the spec; each tuple picks a user and an item
/// uniformly, takes the regime of its segment, then draws e and r. Only e = 1 tuples are logged;
/// a repeated (user, item) pair keeps its latest tuple. The social graph is a stochastic block model on u.
SyntheticDataset generate(const ScmSpec& spec);

/// Normalized mutual information 2 I(A;B) / (H(A) + H(B)); 1 when both labelings are constant.
double normalized_mutual_information(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b);

}  // namespace rest
