#include "rest/scm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "rest/errors.hpp"

namespace rest {
namespace {

constexpr double kRowTolerance = 1e-12;

void check_row(std::span<const double> row, const std::string& name) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(name + ": probability outside [0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowTolerance) throw ValidationError(name + ": row does not sum to 1");
}

void check_rows(const std::vector<double>& table, std::size_t rows, std::size_t width, const std::string& name) {
  if (table.size() != rows * width)
    throw ValidationError(name + ": expected " + std::to_string(rows * width) + " entries, got " +
                          std::to_string(table.size()));
  for (std::size_t i = 0; i < rows; ++i)
    check_row(std::span<const double>(table).subspan(i * width, width), name + " row " + std::to_string(i));
}

std::vector<double> dirichlet_row(Rng& rng, int n) {
  std::vector<double> row(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (auto& x : row) {
    x = -std::log(rng.uniform_open());
    sum += x;
  }
  for (auto& x : row) x /= sum;
  // Push the rounding residue into the largest entry so the row sums to 1 tightly.
  double total = 0.0;
  for (double x : row) total += x;
  *std::max_element(row.begin(), row.end()) += 1.0 - total;
  return row;
}

void append(std::vector<double>& out, const std::vector<double>& row) { out.insert(out.end(), row.begin(), row.end()); }

/// Discretized bell over levels 1..n centered at `mean`.
std::vector<double> rating_bell(double mean, double spread, int n) {
  std::vector<double> row(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (int r = 1; r <= n; ++r) {
    const double z = (r - mean) / spread;
    row[static_cast<std::size_t>(r - 1)] = std::exp(-0.5 * z * z);
    sum += row[static_cast<std::size_t>(r - 1)];
  }
  for (auto& x : row) x /= sum;
  double total = 0.0;
  for (double x : row) total += x;
  *std::max_element(row.begin(), row.end()) += 1.0 - total;
  return row;
}

std::vector<double> uniform_row(int n) { return std::vector<double>(static_cast<std::size_t>(n), 1.0 / n); }

}  // namespace

double ScmSpec::r_given(int u, int v, int s, int e, int level) const {
  const auto& table = e ? p_r_e1 : p_r_e0;
  return table[static_cast<std::size_t>(((u * v_size + v) * s_size + s) * r_levels + (level - 1))];
}

void ScmSpec::validate() const {
  if (g_size < 1 || u_size < 1 || s_size < 1 || v_size < 1 || r_levels < 1)
    throw ValidationError("scm domains must be non-empty");
  const auto G = static_cast<std::size_t>(g_size), U = static_cast<std::size_t>(u_size),
             S = static_cast<std::size_t>(s_size), V = static_cast<std::size_t>(v_size),
             R = static_cast<std::size_t>(r_levels);
  check_rows(p_g, 1, G, "P(G)");
  check_rows(p_u_given_g, G, U, "P(u|G)");
  check_rows(p_s, 1, S, "P(s)");
  check_rows(p_v, 1, V, "P(v)");
  if (p_e1.size() != U * V * S) throw ValidationError("P(e=1|u,v,s): wrong number of entries");
  for (double p : p_e1)
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("P(e=1|u,v,s): probability outside [0, 1]");
  check_rows(p_r_e0, U * V * S, R, "P(r|u,v,s,e=0)");
  check_rows(p_r_e1, U * V * S, R, "P(r|u,v,s,e=1)");
  if (users < 1 || items < 1 || tuples < 0 || segment_length < 1)
    throw ValidationError("scm generation sizes must be positive");
  if (!(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0))
    throw ValidationError("social edge probabilities must lie in [0, 1]");
}

void ScmSpec::to_kv(KeyValueConfig& kv) const {
  kv.set_int("domain.g", g_size);
  kv.set_int("domain.u", u_size);
  kv.set_int("domain.s", s_size);
  kv.set_int("domain.v", v_size);
  kv.set_int("domain.r", r_levels);
  kv.set_doubles("table.g", p_g);
  kv.set_doubles("table.u_given_g", p_u_given_g);
  kv.set_doubles("table.s", p_s);
  kv.set_doubles("table.v", p_v);
  kv.set_doubles("table.e1", p_e1);
  kv.set_doubles("table.r_e0", p_r_e0);
  kv.set_doubles("table.r_e1", p_r_e1);
  kv.set_int("gen.users", users);
  kv.set_int("gen.items", items);
  kv.set_int("gen.tuples", tuples);
  kv.set_int("gen.segment_length", segment_length);
  kv.set_double("gen.p_in", p_in);
  kv.set_double("gen.p_out", p_out);
  kv.set("gen.seed", std::to_string(seed));
}

ScmSpec ScmSpec::from_kv(const KeyValueConfig& kv) {
  static const std::vector<std::string> known = {
      "domain.g", "domain.u",    "domain.s",   "domain.v",   "domain.r",          "table.g",
      "table.u_given_g", "table.s", "table.v", "table.e1",   "table.r_e0",        "table.r_e1",
      "gen.users", "gen.items",  "gen.tuples", "gen.segment_length", "gen.p_in", "gen.p_out", "gen.seed"};
  const auto unknown = kv.unknown_keys(known);
  if (!unknown.empty()) throw ValidationError("unknown scm key '" + unknown.front() + "'");
  auto required = [&](const std::string& key) {
    if (!kv.contains(key)) throw ValidationError("scm spec is missing '" + key + "'");
    return kv.get_doubles(key, {});
  };
  ScmSpec s;
  s.g_size = static_cast<int>(kv.get_int("domain.g", 1));
  s.u_size = static_cast<int>(kv.get_int("domain.u", 1));
  s.s_size = static_cast<int>(kv.get_int("domain.s", 1));
  s.v_size = static_cast<int>(kv.get_int("domain.v", 1));
  s.r_levels = static_cast<int>(kv.get_int("domain.r", 5));
  s.p_g = required("table.g");
  s.p_u_given_g = required("table.u_given_g");
  s.p_s = required("table.s");
  s.p_v = required("table.v");
  s.p_e1 = required("table.e1");
  s.p_r_e0 = required("table.r_e0");
  s.p_r_e1 = required("table.r_e1");
  s.users = kv.get_int("gen.users", s.users);
  s.items = kv.get_int("gen.items", s.items);
  s.tuples = kv.get_int("gen.tuples", s.tuples);
  s.segment_length = kv.get_int("gen.segment_length", s.segment_length);
  s.p_in = kv.get_double("gen.p_in", s.p_in);
  s.p_out = kv.get_double("gen.p_out", s.p_out);
  s.seed = static_cast<std::uint64_t>(kv.get_int("gen.seed", static_cast<std::int64_t>(s.seed)));
  s.validate();
  return s;
}

ScmSpec ScmSpec::load(const std::filesystem::path& path) { return from_kv(KeyValueConfig::load(path)); }

void ScmSpec::save(const std::filesystem::path& path) const {
  KeyValueConfig kv;
  to_kv(kv);
  kv.save(path);
}

ScmSpec random_scm_spec(Rng& rng, int g_size, int u_size, int s_size, int v_size, int r_levels) {
  ScmSpec s;
  s.g_size = g_size;
  s.u_size = u_size;
  s.s_size = s_size;
  s.v_size = v_size;
  s.r_levels = r_levels;
  s.p_g = dirichlet_row(rng, g_size);
  for (int g = 0; g < g_size; ++g) append(s.p_u_given_g, dirichlet_row(rng, u_size));
  s.p_s = dirichlet_row(rng, s_size);
  s.p_v = dirichlet_row(rng, v_size);
  const int cells = u_size * v_size * s_size;
  for (int i = 0; i < cells; ++i) s.p_e1.push_back(rng.uniform());
  for (int i = 0; i < cells; ++i) append(s.p_r_e0, dirichlet_row(rng, r_levels));
  for (int i = 0; i < cells; ++i) append(s.p_r_e1, dirichlet_row(rng, r_levels));
  s.validate();
  return s;
}

ScmSpec inert_scm_spec() {
  ScmSpec s;
  s.g_size = 2;
  s.u_size = 3;
  s.s_size = 3;
  s.v_size = 2;
  s.r_levels = 5;
  s.p_g = uniform_row(2);
  s.p_u_given_g = {0.6, 0.3, 0.1, 0.1, 0.3, 0.6};
  s.p_s = {0.5, 0.25, 0.25};
  s.p_v = uniform_row(2);
  for (int u = 0; u < s.u_size; ++u)
    for (int v = 0; v < s.v_size; ++v)
      for (int st = 0; st < s.s_size; ++st) {
        // A power of two keeps the observational weights an exact rescaling of the interventional ones.
        s.p_e1.push_back(v == 0 ? 0.5 : 0.25);
        append(s.p_r_e1, rating_bell(1.5 + u + 0.5 * st, 1.0, s.r_levels));
      }
  s.p_r_e0 = s.p_r_e1;
  s.validate();
  return s;
}

ScmSpec biased_scm_spec() {
  ScmSpec s;
  s.g_size = 2;
  s.u_size = 2;
  s.s_size = 3;
  s.v_size = 2;
  s.r_levels = 5;
  s.p_g = {0.5, 0.5};
  s.p_u_given_g = {0.7, 0.3, 0.3, 0.7};
  s.p_s = {0.6, 0.3, 0.1};
  s.p_v = {0.5, 0.5};
  for (int u = 0; u < s.u_size; ++u)
    for (int v = 0; v < s.v_size; ++v)
      for (int st = 0; st < s.s_size; ++st) {
        s.p_e1.push_back(0.05 + 0.4 * st + 0.05 * u);
        append(s.p_r_e0, rating_bell(2.0 + 0.5 * u, 1.0, s.r_levels));
        append(s.p_r_e1, rating_bell(2.0 + 0.5 * u + 1.0 * st, 1.0, s.r_levels));
      }
  s.validate();
  return s;
}

ScmSpec regime_scm_spec() {
  ScmSpec s;
  s.g_size = 2;
  s.u_size = 4;
  s.s_size = 4;
  s.v_size = 4;
  s.r_levels = 5;
  s.p_g = {0.5, 0.5};
  s.p_u_given_g = {0.45, 0.45, 0.05, 0.05, 0.05, 0.05, 0.45, 0.45};
  s.p_s = uniform_row(4);
  s.p_v = uniform_row(4);
  for (int u = 0; u < s.u_size; ++u)
    for (int v = 0; v < s.v_size; ++v)
      for (int st = 0; st < s.s_size; ++st) {
        const bool promoted = v == st;
        const bool affinity = v == u;
        s.p_e1.push_back((promoted ? 0.6 : 0.08) + (affinity ? 0.2 : 0.0));
        const double base = 2.6 + (affinity ? 1.0 : 0.0) - 0.3 * ((u + v) % 2);
        append(s.p_r_e0, rating_bell(base - 0.4, 0.9, s.r_levels));
        append(s.p_r_e1, rating_bell(base + (promoted ? 0.9 : -0.2), 0.9, s.r_levels));
      }
  s.users = 1000;
  s.items = 400;
  s.tuples = 200000;
  s.segment_length = 10000;
  s.p_in = 0.02;
  s.p_out = 0.001;
  s.seed = 2024;
  s.validate();
  return s;
}

double InterventionalResult::max_abs_difference() const {
  double m = 0.0;
  for (std::size_t i = 0; i < enumeration.size() && i < adjustment.size(); ++i)
    m = std::max(m, std::abs(enumeration[i] - adjustment[i]));
  return m;
}

InterventionalResult exact_interventional(const ScmSpec& spec, int g, int v) {
  spec.validate();
  if (g < 0 || g >= spec.g_size || v < 0 || v >= spec.v_size) throw ValidationError("query value out of range");
  const int U = spec.u_size, S = spec.s_size, V = spec.v_size, R = spec.r_levels, G = spec.g_size;
  InterventionalResult out;
  out.enumeration.assign(static_cast<std::size_t>(R), 0.0);
  out.adjustment.assign(static_cast<std::size_t>(R), 0.0);

  // (i) Mutilated graph: the e factor is replaced by the indicator e = 1.
  {
    std::vector<double> mass(static_cast<std::size_t>(R), 0.0);
    double total = 0.0;
    for (int u = 0; u < U; ++u)
      for (int s = 0; s < S; ++s) {
        const double w = spec.p_g[g] * spec.u_given_g(g, u) * spec.p_s[s] * spec.p_v[v];
        for (int r = 1; r <= R; ++r) {
          const double p = w * spec.r_given(u, v, s, 1, r);
          mass[r - 1] += p;
          total += p;
        }
      }
    if (total > 0.0) {
      for (int r = 0; r < R; ++r) out.enumeration[r] = mass[r] / total;
    } else {
      out.zero_cells.push_back({"P(G,v)", {g, v}});
    }
  }

  // (ii) Adjustment with every factor taken from the observational joint P(G,u,s,v,e,r).
  auto joint = [&](int gg, int u, int s, int vv, int e, int r) {
    const double pe = e ? spec.e1(u, vv, s) : 1.0 - spec.e1(u, vv, s);
    return spec.p_g[gg] * spec.u_given_g(gg, u) * spec.p_s[s] * spec.p_v[vv] * pe * spec.r_given(u, vv, s, e, r);
  };
  std::vector<double> p_gu(static_cast<std::size_t>(U), 0.0);
  std::vector<double> p_s(static_cast<std::size_t>(S), 0.0);
  double p_gmass = 0.0, all = 0.0;
  for (int gg = 0; gg < G; ++gg)
    for (int u = 0; u < U; ++u)
      for (int s = 0; s < S; ++s)
        for (int vv = 0; vv < V; ++vv)
          for (int e = 0; e < 2; ++e)
            for (int r = 1; r <= R; ++r) {
              const double p = joint(gg, u, s, vv, e, r);
              all += p;
              p_s[s] += p;
              if (gg == g) {
                p_gu[u] += p;
                p_gmass += p;
              }
            }
  if (!(p_gmass > 0.0)) {
    out.zero_cells.push_back({"P(G)", {g}});
    return out;
  }
  for (int u = 0; u < U; ++u) {
    const double pu = p_gu[u] / p_gmass;
    if (pu == 0.0) continue;
    for (int s = 0; s < S; ++s) {
      const double ps = p_s[s] / all;
      if (ps == 0.0) continue;
      double cell = 0.0;
      for (int r = 1; r <= R; ++r) cell += joint(g, u, s, v, 1, r);
      if (!(cell > 0.0)) {
        out.zero_cells.push_back({"P(G,u,v,s,e=1)", {g, u, v, s}});
        continue;
      }
      for (int r = 1; r <= R; ++r) out.adjustment[r - 1] += joint(g, u, s, v, 1, r) / cell * pu * ps;
    }
  }
  return out;
}

std::vector<double> observational_rating(const ScmSpec& spec, int g, int v) {
  spec.validate();
  if (g < 0 || g >= spec.g_size || v < 0 || v >= spec.v_size) throw ValidationError("query value out of range");
  const int R = spec.r_levels;
  std::vector<double> mass(static_cast<std::size_t>(R), 0.0);
  double total = 0.0;
  // Same factor order as the enumeration in exact_interventional, with P(e=1|u,v,s) applied last.
  for (int u = 0; u < spec.u_size; ++u)
    for (int s = 0; s < spec.s_size; ++s) {
      const double w = spec.p_g[g] * spec.u_given_g(g, u) * spec.p_s[s] * spec.p_v[v] * spec.e1(u, v, s);
      for (int r = 1; r <= R; ++r) {
        const double p = w * spec.r_given(u, v, s, 1, r);
        mass[r - 1] += p;
        total += p;
      }
    }
  if (!(total > 0.0)) throw ValidationError("P(G, v, e=1) is zero for this query");
  for (auto& x : mass) x /= total;
  return mass;
}

double measure_selection_bias(const ScmSpec& spec, int g, int v) {
  const auto obs = observational_rating(spec, g, v);
  const auto intv = exact_interventional(spec, g, v).enumeration;
  double tv = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) tv += std::abs(obs[i] - intv[i]);
  return 0.5 * tv;
}

std::vector<ScmTuple> sample_tuples(const ScmSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  const auto R = static_cast<std::size_t>(spec.r_levels);
  std::vector<ScmTuple> out(n);
  for (auto& t : out) {
    t.g = static_cast<int>(rng.categorical(spec.p_g));
    t.u = static_cast<int>(rng.categorical(
        std::span<const double>(spec.p_u_given_g).subspan(static_cast<std::size_t>(t.g * spec.u_size), static_cast<std::size_t>(spec.u_size))));
    t.s = static_cast<int>(rng.categorical(spec.p_s));
    t.v = static_cast<int>(rng.categorical(spec.p_v));
    t.e = rng.bernoulli(spec.e1(t.u, t.v, t.s)) ? 1 : 0;
    const auto& table = t.e ? spec.p_r_e1 : spec.p_r_e0;
    const auto off = static_cast<std::size_t>(((t.u * spec.v_size + t.v) * spec.s_size + t.s)) * R;
    t.r = 1 + static_cast<int>(rng.categorical(std::span<const double>(table).subspan(off, R)));
  }
  return out;
}

void SyntheticDataset::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "interactions.tsv", std::ios::binary);
    if (!out) throw ValidationError("cannot write " + (dir / "interactions.tsv").string());
    for (const auto& r : dataset.interactions)
      out << dataset.users.original(r.user) << '\t' << dataset.items.original(r.item) << '\t' << r.rating << '\t'
          << r.timestamp.value_or(0) << '\n';
  }
  {
    std::ofstream out(dir / "social.tsv", std::ios::binary);
    if (!out) throw ValidationError("cannot write " + (dir / "social.tsv").string());
    for (const auto& [a, b] : dataset.social_edges)
      if (a < b) out << dataset.users.original(a) << '\t' << dataset.users.original(b) << '\n';
  }
  {
    std::ofstream out(dir / "ledger.tsv", std::ios::binary);
    if (!out) throw ValidationError("cannot write " + (dir / "ledger.tsv").string());
    out << "user\titem\tuser_type\tregime\tsegment\n";
    for (std::size_t i = 0; i < ledger.size(); ++i) {
      const auto& r = dataset.interactions[i];
      out << dataset.users.original(r.user) << '\t' << dataset.items.original(r.item) << '\t'
          << ledger[i].user_type << '\t' << ledger[i].regime << '\t' << ledger[i].segment << '\n';
    }
  }
}

SyntheticDataset generate(const ScmSpec& spec) {
  spec.validate();
  const Rng root(spec.seed);
  SyntheticDataset out;
  const auto n_users = static_cast<std::size_t>(spec.users);
  const auto n_items = static_cast<std::size_t>(spec.items);

  Rng user_rng = root.derive(1);
  for (std::size_t i = 0; i < n_users; ++i) {
    const int g = static_cast<int>(user_rng.categorical(spec.p_g));
    const int u = static_cast<int>(user_rng.categorical(std::span<const double>(spec.p_u_given_g)
                                                             .subspan(static_cast<std::size_t>(g * spec.u_size),
                                                                      static_cast<std::size_t>(spec.u_size))));
    out.user_group.push_back(g);
    out.user_type.push_back(u);
  }
  Rng item_rng = root.derive(2);
  for (std::size_t i = 0; i < n_items; ++i) out.item_type.push_back(static_cast<int>(item_rng.categorical(spec.p_v)));

  const auto segments =
      static_cast<std::size_t>((spec.tuples + spec.segment_length - 1) / spec.segment_length);
  Rng regime_rng = root.derive(3);
  for (std::size_t i = 0; i < segments; ++i) out.segment_regime.push_back(static_cast<int>(regime_rng.categorical(spec.p_s)));

  struct Logged {
    InteractionRecord record;
    LedgerEntry entry;
  };
  std::vector<Logged> logged;
  Rng tuple_rng = root.derive(4);
  const auto R = static_cast<std::size_t>(spec.r_levels);
  for (std::int64_t t = 0; t < spec.tuples; ++t) {
    const auto user = static_cast<UserId>(tuple_rng.index(n_users));
    const auto item = static_cast<ItemId>(tuple_rng.index(n_items));
    const auto segment = t / spec.segment_length;
    const int s = out.segment_regime[static_cast<std::size_t>(segment)];
    const int u = out.user_type[static_cast<std::size_t>(user)];
    const int v = out.item_type[static_cast<std::size_t>(item)];
    const int e = tuple_rng.bernoulli(spec.e1(u, v, s)) ? 1 : 0;
    const auto& table = e ? spec.p_r_e1 : spec.p_r_e0;
    const auto off = static_cast<std::size_t>((u * spec.v_size + v) * spec.s_size + s) * R;
    const int r = 1 + static_cast<int>(tuple_rng.categorical(std::span<const double>(table).subspan(off, R)));
    if (!e) continue;
    logged.push_back({InteractionRecord{user, item, r, true, t}, LedgerEntry{u, s, segment}});
  }
  out.tuples_sampled = static_cast<std::size_t>(spec.tuples);

  // Keep the latest tuple of each (user, item) pair, in time order.
  std::set<std::pair<UserId, ItemId>> seen;
  std::vector<Logged> kept;
  for (auto it = logged.rbegin(); it != logged.rend(); ++it)
    if (seen.emplace(it->record.user, it->record.item).second) kept.push_back(*it);
  std::reverse(kept.begin(), kept.end());
  out.tuples_exposed = logged.size();
  out.duplicates_replaced = logged.size() - kept.size();

  Dataset& ds = out.dataset;
  ds.num_users = static_cast<std::int32_t>(n_users);
  ds.num_items = static_cast<std::int32_t>(n_items);
  ds.feedback_kind = FeedbackKind::kExplicit;
  ds.rating_levels = spec.r_levels;
  for (std::size_t i = 0; i < n_users; ++i) ds.users.intern(std::to_string(i));
  for (std::size_t i = 0; i < n_items; ++i) ds.items.intern(std::to_string(i));
  for (auto& k : kept) {
    ds.interactions.push_back(k.record);
    out.ledger.push_back(k.entry);
  }

  Rng social_rng = root.derive(5);
  for (std::size_t a = 0; a < n_users; ++a)
    for (std::size_t b = a + 1; b < n_users; ++b) {
      const double p = out.user_type[a] == out.user_type[b] ? spec.p_in : spec.p_out;
      if (social_rng.bernoulli(p)) {
        ds.social_edges.emplace_back(static_cast<UserId>(a), static_cast<UserId>(b));
        ds.social_edges.emplace_back(static_cast<UserId>(b), static_cast<UserId>(a));
      }
    }
  std::sort(ds.social_edges.begin(), ds.social_edges.end());
  ds.validate();
  return out;
}

double normalized_mutual_information(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  if (a.size() != b.size()) throw ValidationError("label vectors differ in length");
  if (a.empty()) throw ValidationError("NMI needs at least one label");
  const double n = static_cast<double>(a.size());
  std::map<std::int64_t, double> ca, cb;
  std::map<std::pair<std::int64_t, std::int64_t>, double> cab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
    cab[{a[i], b[i]}] += 1.0;
  }
  auto entropy = [&](const std::map<std::int64_t, double>& c) {
    double h = 0.0;
    for (const auto& [k, x] : c) h -= x / n * std::log(x / n);
    return h;
  };
  const double ha = entropy(ca), hb = entropy(cb);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  double mi = 0.0;
  for (const auto& [k, x] : cab) mi += x / n * std::log(x * n / (ca[k.first] * cb[k.second]));
  return std::clamp(2.0 * mi / (ha + hb), 0.0, 1.0);
}

}  // namespace rest
