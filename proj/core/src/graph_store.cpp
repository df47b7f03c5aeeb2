#include "rest/graph_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "rest/errors.hpp"
#include "rest/rng.hpp"

namespace rest {

GraphStore::GraphStore(const Dataset& train)
    : num_users_(train.num_users),
      num_items_(train.num_items),
      rating_levels_(train.rating_levels),
      feedback_kind_(train.feedback_kind) {
  const auto n = static_cast<std::size_t>(num_users_);

  std::vector<std::vector<RatedItem>> per_user(n);
  for (const auto& r : train.interactions) per_user[static_cast<std::size_t>(r.user)].push_back({r.item, r.rating});
  item_offsets_.assign(n + 1, 0);
  for (std::size_t u = 0; u < n; ++u) {
    auto& list = per_user[u];
    std::sort(list.begin(), list.end(), [](const RatedItem& a, const RatedItem& b) { return a.item < b.item; });
    list.erase(std::unique(list.begin(), list.end(),
                           [](const RatedItem& a, const RatedItem& b) { return a.item == b.item; }),
               list.end());
    item_offsets_[u + 1] = item_offsets_[u] + list.size();
    items_.insert(items_.end(), list.begin(), list.end());
  }

  std::vector<std::vector<UserId>> adj(n);
  for (const auto& [a, b] : train.social_edges) {
    if (a == b) continue;
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  neighbor_offsets_.assign(n + 1, 0);
  for (std::size_t u = 0; u < n; ++u) {
    auto& list = adj[u];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    neighbor_offsets_[u + 1] = neighbor_offsets_[u] + list.size();
    neighbors_.insert(neighbors_.end(), list.begin(), list.end());
  }
}

std::span<const RatedItem> GraphStore::items_of(UserId u) const {
  const auto i = static_cast<std::size_t>(u);
  return {items_.data() + item_offsets_[i], item_offsets_[i + 1] - item_offsets_[i]};
}

std::span<const UserId> GraphStore::neighbors_of(UserId u) const {
  const auto i = static_cast<std::size_t>(u);
  return {neighbors_.data() + neighbor_offsets_[i], neighbor_offsets_[i + 1] - neighbor_offsets_[i]};
}

std::optional<int> GraphStore::rating_of(UserId u, ItemId v) const {
  auto items = items_of(u);
  auto it = std::lower_bound(items.begin(), items.end(), v,
                             [](const RatedItem& a, ItemId target) { return a.item < target; });
  if (it == items.end() || it->item != v) return std::nullopt;
  return it->rating;
}

bool GraphStore::exposed(UserId u, ItemId v) const { return rating_of(u, v).has_value(); }

std::vector<ItemId> beta_frequency_set(const GraphStore& g, UserId u, int beta) {
  if (beta < 1) throw ValidationError("beta must be a positive integer");
  std::vector<ItemId> candidates;
  for (UserId k : g.neighbors_of(u))
    for (const auto& ri : g.items_of(k)) candidates.push_back(ri.item);
  std::sort(candidates.begin(), candidates.end());

  std::vector<ItemId> out;
  for (std::size_t i = 0; i < candidates.size();) {
    std::size_t j = i;
    while (j < candidates.size() && candidates[j] == candidates[i]) ++j;
    if (static_cast<int>(j - i) >= beta && !g.exposed(u, candidates[i])) out.push_back(candidates[i]);
    i = j;
  }
  return out;
}

int vote_rating(const GraphStore& g, UserId u, ItemId v) {
  std::vector<int> counts(static_cast<std::size_t>(g.rating_levels()) + 1, 0);
  bool any = false;
  for (UserId k : g.neighbors_of(u)) {
    if (auto r = g.rating_of(k, v)) {
      ++counts[static_cast<std::size_t>(*r)];
      any = true;
    }
  }
  if (!any) throw ValidationError("no neighbor of the user rated the item");
  int best = 1;
  for (int level = 1; level <= g.rating_levels(); ++level)
    if (counts[static_cast<std::size_t>(level)] >= counts[static_cast<std::size_t>(best)]) best = level;
  return best;
}

std::vector<CounterfactualSample> build_counterfactual_pool(const GraphStore& g, const PoolOptions& options) {
  std::vector<CounterfactualSample> pool;
  Rng root(options.seed);
  const bool implicit = g.feedback_kind() == FeedbackKind::kImplicit;
  for (UserId u = 0; u < g.num_users(); ++u) {
    auto candidates = beta_frequency_set(g, u, options.beta);
    if (candidates.empty()) continue;
    const std::size_t cap = options.cap_per_user.value_or(g.items_of(u).size());
    if (candidates.size() > cap) {
      Rng rng = root.derive(static_cast<std::uint64_t>(u));
      rng.shuffle(std::span<ItemId>(candidates));
      candidates.resize(cap);
      std::sort(candidates.begin(), candidates.end());
    }
    for (ItemId v : candidates) pool.push_back({u, v, implicit ? 1 : vote_rating(g, u, v)});
  }
  return pool;
}

void save_pool_tsv(const std::vector<CounterfactualSample>& pool, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& s : pool) out << s.user << '\t' << s.item << '\t' << s.voted_rating << "\t0\n";
}

std::vector<CounterfactualSample> load_pool_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<CounterfactualSample> pool;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    CounterfactualSample s;
    int exposed = -1;
    if (!(ss >> s.user >> s.item >> s.voted_rating >> exposed) || exposed != 0)
      throw ParseError(path.string(), line_no, "expected user<TAB>item<TAB>voted_rating<TAB>0");
    pool.push_back(s);
  }
  return pool;
}

}  // namespace rest
