#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rest/dataset.hpp"
#include "rest/graph_store.hpp"
#include "rest/kv_config.hpp"
#include "rest/nn.hpp"
#include "rest/rng.hpp"

namespace rest {

using nn::Mat;
using nn::Vec;

/// How the social aggregator forms its pooled values.
/// kNeighbor pools neighbor embeddings; kSelf pools the user's own embedding
/// with neighbor-dependent weights (the formula read literally).
enum class SocialAggregation { kNeighbor, kSelf };

/// kRestS drops the strategy encoder, its KL term and the strategy input of the exposure decoder.
enum class Ablation { kFull, kRestS };

std::string to_string(SocialAggregation v);
std::string to_string(Ablation v);
SocialAggregation social_aggregation_from_string(const std::string& s);
Ablation ablation_from_string(const std::string& s);

struct ModelConfig {
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  int rating_levels = 5;
  FeedbackKind feedback_kind = FeedbackKind::kExplicit;

  int dim = 64;
  int rating_dim = 16;
  int hidden = 0;  // 0 means 2 * dim
  int blocks = 16;
  int categories = 4;
  SocialAggregation social_aggregation = SocialAggregation::kNeighbor;
  Ablation ablation = Ablation::kFull;

  int hidden_width() const { return hidden > 0 ? hidden : 2 * dim; }
  int message_dim() const { return dim + rating_dim; }
  int strategy_dim() const { return blocks * categories; }

  void validate() const;
  void to_kv(KeyValueConfig& kv, const std::string& prefix = "model.") const;
  static ModelConfig from_kv(const KeyValueConfig& kv, const std::string& prefix = "model.");
  bool operator==(const ModelConfig&) const = default;
};

/// Every trainable tensor. Embedding tables store one entity per column.
struct ModelParameters {
  Mat user_embeddings;    // dim x users
  Mat item_embeddings;    // dim x items
  Mat rating_embeddings;  // rating_dim x levels

  nn::Mlp bipartite_scorer;  // W_b
  nn::Mlp strategy_scorer;   // W_d
  nn::Mlp social_scorer;     // W_s
  // Aggregates used when a neighborhood is empty.
  Vec empty_bipartite;
  Vec empty_strategy;
  Vec empty_social;

  nn::Mlp user_head0, user_head1;          // g0, g1
  nn::Mlp strategy_head0, strategy_head1;  // phi0, phi1
  nn::Mlp exposure_decoder;                // f_e
  nn::Mlp rating_head0, rating_head1;      // f0, f1

  /// Zero tensors with the shapes implied by `cfg`.
  static ModelParameters zeros(const ModelConfig& cfg);
  /// Seeded initialization: embeddings Uniform(-1/sqrt(dim), 1/sqrt(dim)), MLPs per nn::Mlp::init.
  static ModelParameters initialize(const ModelConfig& cfg, std::uint64_t seed, double rating_bias);

  /// Calls f(name, tensor, is_embedding_table) for every tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

  void set_zero();
  bool all_finite() const;
  std::size_t scalar_count() const;

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& p, F& f) {
    f(std::string("user_embeddings"), p.user_embeddings, true);
    f(std::string("item_embeddings"), p.item_embeddings, true);
    f(std::string("rating_embeddings"), p.rating_embeddings, false);
    auto mlp = [&](const char* name, auto& m) { m.visit(name, [&](const std::string& n, auto& t) { f(n, t, false); }); };
    mlp("bipartite_scorer", p.bipartite_scorer);
    mlp("strategy_scorer", p.strategy_scorer);
    mlp("social_scorer", p.social_scorer);
    f(std::string("empty_bipartite"), p.empty_bipartite, false);
    f(std::string("empty_strategy"), p.empty_strategy, false);
    f(std::string("empty_social"), p.empty_social, false);
    mlp("user_head0", p.user_head0);
    mlp("user_head1", p.user_head1);
    mlp("strategy_head0", p.strategy_head0);
    mlp("strategy_head1", p.strategy_head1);
    mlp("exposure_decoder", p.exposure_decoder);
    mlp("rating_head0", p.rating_head0);
    mlp("rating_head1", p.rating_head1);
  }
};

/// A B x C categorical latent: logits, noiseless probabilities, the relaxed sample and its argmax code.
struct StrategyCode {
  Mat logits;
  Mat probabilities;
  Mat relaxed;
  std::vector<int> hard_code;

  /// Relaxed sample flattened block by block.
  Vec flat() const;
};

/// The neighborhood used to encode one user.
struct UserContext {
  UserId user = 0;
  std::vector<RatedItem> items;
  std::vector<UserId> neighbors;
};

struct SocialPair {
  UserContext other;
  double label = 1.0;  // 1 for an observed edge, 0 for a sampled non-edge
};

struct TrainingSample {
  UserContext context;
  ItemId item = 0;
  int rating = 1;  // 0 marks a sampled implicit negative
  bool exposed = true;
  std::vector<SocialPair> social;
};

struct Batch {
  std::vector<TrainingSample> samples;
};

/// Per-sample means of each objective term.
struct LossTerms {
  double kl_strategy = 0.0;
  double nll_social = 0.0;
  double nll_exposure = 0.0;
  double nll_rating = 0.0;
  double regularizer = 0.0;  // unweighted sum of squares
  double gamma = 0.0;

  double objective() const { return kl_strategy + nll_social + nll_exposure + nll_rating; }
  double total() const { return objective() + gamma * regularizer; }
};

struct Aggregate {
  Vec h;
  Vec weights;  // attention weights; empty when the default vector was used
};

/// The exposure-aware variational recommender.
class RestModel {
 public:
  RestModel(ModelConfig config, std::uint64_t seed, double rating_bias = 0.0);
  RestModel(ModelConfig config, ModelParameters params);

  const ModelConfig& config() const { return config_; }
  ModelParameters& params() { return params_; }
  const ModelParameters& params() const { return params_; }

  Aggregate aggregate_bipartite(UserId u, std::span<const RatedItem> items) const;
  Aggregate aggregate_strategy_context(UserId u, std::span<const RatedItem> items) const;
  Aggregate aggregate_social(UserId u, std::span<const UserId> neighbors) const;

  Vec encode_user(const Vec& h_bipartite, const Vec& h_social, bool exposed) const;
  Vec user_latent(const UserContext& ctx, bool exposed) const;

  /// Relaxed categorical sample. `noise` is B x C Gumbel noise; pass a zero matrix for the noiseless code.
  StrategyCode encode_strategy(const Vec& h_strategy, ItemId v, bool exposed, double tau, const Mat& noise) const;
  StrategyCode encode_strategy(const Vec& h_strategy, ItemId v, bool exposed, double tau, Rng& rng) const;

  static double reconstruct_social_edge(const Vec& h_u, const Vec& h_other);
  double reconstruct_exposure(const Vec& h_u, ItemId v, const Vec& strategy_flat) const;
  /// Explicit: raw real prediction. Implicit: probability in (0, 1).
  double predict_rating(const Vec& h_u, ItemId v, bool exposed) const;

  /// Evaluation path with e = 1: g1 then f1, no sampling. Explicit predictions are clamped to the level range.
  /// The target item is left out of its own context.
  double predict_for_eval(const GraphStore& graph, UserId u, ItemId v) const;
  /// Unclamped logit (implicit) or raw value (explicit) of the same path, used for ranking.
  double score_for_eval(const GraphStore& graph, UserId u, ItemId v) const;

  /// score_for_eval over a candidate list, sharing the user latent across candidates outside C(u).
  std::vector<double> score_candidates(const GraphStore& graph, UserId u, std::span<const ItemId> items) const;

  /// Noiseless hard strategy code of (u, v) under e = 1, as used for visualization.
  std::vector<int> strategy_code_for_eval(const GraphStore& graph, UserId u, ItemId v) const;

  /// Objective terms for a batch. Gumbel noise is drawn from `rng` in sample order.
  /// When `grad` is given, gradients of total() are accumulated into it.
  LossTerms loss_terms(const Batch& batch, double tau, double gamma, Rng& rng, ModelParameters* grad = nullptr) const;

  /// Sum of squares over dense weights plus the embedding columns the batch touches.
  double regularizer(const Batch& batch, ModelParameters* grad = nullptr, double scale = 0.0) const;

  /// Context for u with v removed and full neighborhoods.
  static UserContext full_context(const GraphStore& graph, UserId u, ItemId exclude);

 private:
  void check_user(UserId u) const;
  void check_item(ItemId v) const;
  Mat bipartite_messages(std::span<const RatedItem> items) const;

  ModelConfig config_;
  ModelParameters params_;
};

}  // namespace rest
