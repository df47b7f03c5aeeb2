#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "rest/dataset.hpp"

namespace rest {

struct RatedItem {
  ItemId item = 0;
  int rating = 1;

  bool operator==(const RatedItem&) const = default;
};

/// Immutable adjacency over the training split: C(u) with ratings and the social neighborhood N(u).
class GraphStore {
 public:
  GraphStore() = default;
  /// Builds from the training split only. Social edges come from `train.social_edges`.
  explicit GraphStore(const Dataset& train);

  std::int32_t num_users() const { return num_users_; }
  std::int32_t num_items() const { return num_items_; }
  int rating_levels() const { return rating_levels_; }
  FeedbackKind feedback_kind() const { return feedback_kind_; }

  /// C(u), sorted by item id.
  std::span<const RatedItem> items_of(UserId u) const;
  /// N(u), sorted, never containing u.
  std::span<const UserId> neighbors_of(UserId u) const;

  bool exposed(UserId u, ItemId v) const;
  std::optional<int> rating_of(UserId u, ItemId v) const;

 private:
  std::int32_t num_users_ = 0;
  std::int32_t num_items_ = 0;
  int rating_levels_ = 5;
  FeedbackKind feedback_kind_ = FeedbackKind::kExplicit;
  // CSR layout.
  std::vector<std::size_t> item_offsets_;
  std::vector<RatedItem> items_;
  std::vector<std::size_t> neighbor_offsets_;
  std::vector<UserId> neighbors_;
};

/// An approximate unexposed sample (u, v, voted r, e = 0).
struct CounterfactualSample {
  UserId user = 0;
  ItemId item = 0;
  int voted_rating = 1;

  bool operator==(const CounterfactualSample&) const = default;
};

/// Items not in C(u) that at least `beta` of u's neighbors were exposed to, sorted by id.
std::vector<ItemId> beta_frequency_set(const GraphStore& g, UserId u, int beta);

/// Modal rating among u's neighbors who rated v. Ties go to the larger rating.
/// Throws ValidationError when no neighbor rated v.
int vote_rating(const GraphStore& g, UserId u, ItemId v);

struct PoolOptions {
  int beta = 2;
  /// Per-user cap; nullopt means |C(u)|.
  std::optional<std::size_t> cap_per_user;
  std::uint64_t seed = 7;
};

std::vector<CounterfactualSample> build_counterfactual_pool(const GraphStore& g, const PoolOptions& options);

/// `user<TAB>item<TAB>voted_rating<TAB>0` per line.
void save_pool_tsv(const std::vector<CounterfactualSample>& pool, const std::filesystem::path& path);
std::vector<CounterfactualSample> load_pool_tsv(const std::filesystem::path& path);

}  // namespace rest
