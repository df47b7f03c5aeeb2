#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rest/dataset.hpp"
#include "rest/graph_store.hpp"
#include "rest/model.hpp"
#include "rest/rng.hpp"

namespace rest::fixtures {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("rest_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Dense dataset without id maps: every listed (user, item, rating) exposed, social edges symmetrized.
inline Dataset make_dataset(int users, int items, const std::vector<std::tuple<int, int, int>>& rows,
                            const std::vector<std::pair<int, int>>& edges = {},
                            FeedbackKind kind = FeedbackKind::kExplicit, int levels = 5) {
  Dataset ds;
  ds.num_users = users;
  ds.num_items = items;
  ds.feedback_kind = kind;
  ds.rating_levels = kind == FeedbackKind::kImplicit ? 1 : levels;
  for (auto [u, v, r] : rows) ds.interactions.push_back({u, v, r, true, std::nullopt});
  for (auto [a, b] : edges) {
    ds.social_edges.emplace_back(a, b);
    ds.social_edges.emplace_back(b, a);
  }
  std::sort(ds.social_edges.begin(), ds.social_edges.end());
  ds.social_edges.erase(std::unique(ds.social_edges.begin(), ds.social_edges.end()), ds.social_edges.end());
  return ds;
}

/// Random explicit dataset where each user rates `per_user` distinct items and befriends a few others.
inline Dataset random_dataset(Rng& rng, int users, int items, int per_user, double edge_p, int levels = 5,
                              FeedbackKind kind = FeedbackKind::kExplicit) {
  std::vector<std::tuple<int, int, int>> rows;
  for (int u = 0; u < users; ++u) {
    std::vector<int> all(static_cast<std::size_t>(items));
    for (int v = 0; v < items; ++v) all[static_cast<std::size_t>(v)] = v;
    rng.shuffle(std::span<int>(all));
    for (int k = 0; k < std::min(per_user, items); ++k) {
      const int r = kind == FeedbackKind::kImplicit ? 1 : 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(levels)));
      rows.emplace_back(u, all[static_cast<std::size_t>(k)], r);
    }
  }
  std::vector<std::pair<int, int>> edges;
  for (int a = 0; a < users; ++a)
    for (int b = a + 1; b < users; ++b)
      if (rng.bernoulli(edge_p)) edges.emplace_back(a, b);
  return make_dataset(users, items, rows, edges, kind, levels);
}

inline ModelConfig micro_config(int users, int items, FeedbackKind kind = FeedbackKind::kExplicit) {
  ModelConfig c;
  c.num_users = users;
  c.num_items = items;
  c.rating_levels = kind == FeedbackKind::kImplicit ? 1 : 5;
  c.feedback_kind = kind;
  c.dim = 4;
  c.rating_dim = 2;
  c.hidden = 5;
  c.blocks = 2;
  c.categories = 3;
  return c;
}

/// A batch of four samples over a small graph: two exposed, two counterfactual, each with social pairs.
inline Batch micro_batch(const GraphStore& g) {
  Batch b;
  auto ctx = [&](UserId u, ItemId exclude) { return RestModel::full_context(g, u, exclude); };
  TrainingSample s0{ctx(0, 1), 1, 4, true, {}};
  s0.social.push_back({ctx(1, -1), 1.0});
  s0.social.push_back({ctx(3, -1), 0.0});
  TrainingSample s1{ctx(2, 0), 0, 2, true, {}};
  s1.social.push_back({ctx(1, -1), 1.0});
  TrainingSample s2{ctx(0, 3), 3, 5, false, {}};
  s2.social.push_back({ctx(2, -1), 0.0});
  TrainingSample s3{ctx(3, 2), 2, 1, false, {}};
  b.samples = {s0, s1, s2, s3};
  return b;
}

/// Four users, five items; user 3 has no social neighbors so the empty-neighborhood default is exercised.
inline Dataset micro_dataset(FeedbackKind kind = FeedbackKind::kExplicit) {
  const bool imp = kind == FeedbackKind::kImplicit;
  auto r = [&](int x) { return imp ? 1 : x; };
  return make_dataset(4, 5,
                      {{0, 0, r(5)}, {0, 1, r(4)}, {0, 2, r(3)}, {1, 1, r(2)}, {1, 3, r(5)}, {2, 0, r(1)},
                       {2, 4, r(4)}, {3, 2, r(3)}},
                      {{0, 1}, {1, 2}}, kind);
}

}  // namespace rest::fixtures
