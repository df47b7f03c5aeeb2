#include <algorithm>
#include <cmath>
#include <numeric>

#include "rest/errors.hpp"
#include "rest/training.hpp"

namespace rest {
namespace {

constexpr std::uint64_t kExposedStream = 0x100000000ULL;
constexpr std::uint64_t kPoolStream = 0x200000000ULL;
constexpr int kRejectionTries = 64;

// Keeps `fanout` random elements (all when fanout is 0), in their original order.
template <typename T>
std::vector<T> subsample(std::vector<T> values, std::size_t fanout, Rng& rng) {
  if (fanout == 0 || values.size() <= fanout) return values;
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < fanout; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.index(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(fanout);
  std::sort(idx.begin(), idx.end());
  std::vector<T> out;
  out.reserve(fanout);
  for (auto i : idx) out.push_back(values[i]);
  return out;
}

}  // namespace

BatchAssembler::BatchAssembler(const GraphStore& graph, const Dataset& train,
                               std::span<const CounterfactualSample> pool, const TrainConfig& cfg)
    : graph_(graph), train_(train), pool_(pool), cfg_(cfg), base_(cfg.seed) {
  cfg_.validate();
  if (train.interactions.empty()) throw ValidationError("training split is empty");
  const std::size_t n = train.interactions.size();
  if (pool.empty() || cfg.cf_ratio == 0.0) {
    exposed_per_batch_ = std::min(cfg.batch_size, n);
  } else {
    const auto share = static_cast<std::size_t>(std::llround(static_cast<double>(cfg.batch_size) / (1.0 + cfg.cf_ratio)));
    exposed_per_batch_ = std::min(std::max<std::size_t>(share, 1), n);
    cf_per_batch_ = std::min(cfg.batch_size - std::min(cfg.batch_size, share), pool.size());
  }
  exposed_order_.resize(n);
  std::iota(exposed_order_.begin(), exposed_order_.end(), std::size_t{0});
  exposed_cursor_ = n;
  cf_order_.resize(pool.size());
  std::iota(cf_order_.begin(), cf_order_.end(), std::size_t{0});
  cf_cursor_ = pool.size();
}

std::vector<std::size_t> BatchAssembler::take(std::vector<std::size_t>& order, std::size_t& cursor,
                                              std::size_t count, std::uint64_t stream, std::int64_t& epoch) {
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    if (cursor >= order.size()) {
      ++epoch;
      Rng rng = base_.derive(stream + static_cast<std::uint64_t>(epoch));
      std::sort(order.begin(), order.end());
      rng.shuffle(std::span<std::size_t>(order));
      cursor = 0;
    }
    out.push_back(order[cursor++]);
  }
  return out;
}

UserContext BatchAssembler::sample_context(UserId u, ItemId exclude, Rng& rng) const {
  UserContext ctx;
  ctx.user = u;
  std::vector<RatedItem> items;
  for (const auto& ri : graph_.items_of(u))
    if (ri.item != exclude) items.push_back(ri);
  ctx.items = subsample(std::move(items), cfg_.item_fanout, rng);
  auto nb = graph_.neighbors_of(u);
  ctx.neighbors = subsample(std::vector<UserId>(nb.begin(), nb.end()), cfg_.social_fanout, rng);
  return ctx;
}

void BatchAssembler::add_social_pairs(TrainingSample& sample, Rng& rng) const {
  const UserId u = sample.context.user;
  const auto nb = graph_.neighbors_of(u);
  if (nb.empty()) return;
  const auto users = static_cast<std::uint64_t>(graph_.num_users());
  for (std::size_t i = 0; i < cfg_.social_pairs; ++i) {
    const UserId pos = nb[static_cast<std::size_t>(rng.index(nb.size()))];
    sample.social.push_back({sample_context(pos, -1, rng), 1.0});
    for (int t = 0; t < kRejectionTries; ++t) {
      const auto neg = static_cast<UserId>(rng.index(users));
      if (neg == u || std::binary_search(nb.begin(), nb.end(), neg)) continue;
      sample.social.push_back({sample_context(neg, -1, rng), 0.0});
      break;
    }
  }
}

ItemId BatchAssembler::sample_unobserved_item(UserId u, Rng& rng) const {
  const auto items = static_cast<std::uint64_t>(graph_.num_items());
  for (int t = 0; t < kRejectionTries; ++t) {
    const auto v = static_cast<ItemId>(rng.index(items));
    if (!graph_.exposed(u, v)) return v;
  }
  return -1;
}

Batch BatchAssembler::next(std::int64_t step) {
  Rng rng = base_.derive(2 * static_cast<std::uint64_t>(step));
  const bool implicit = graph_.feedback_kind() == FeedbackKind::kImplicit;
  Batch batch;
  batch.samples.reserve(exposed_per_batch_ * (1 + (implicit ? cfg_.implicit_negatives : 0)) + cf_per_batch_);

  for (auto i : take(exposed_order_, exposed_cursor_, exposed_per_batch_, kExposedStream, exposed_epoch_)) {
    const auto& rec = train_.interactions[i];
    TrainingSample s;
    s.context = sample_context(rec.user, rec.item, rng);
    s.item = rec.item;
    s.rating = rec.rating;
    s.exposed = true;
    add_social_pairs(s, rng);
    if (implicit) {
      for (std::size_t k = 0; k < cfg_.implicit_negatives; ++k) {
        const ItemId v = sample_unobserved_item(rec.user, rng);
        if (v < 0) break;
        TrainingSample neg;
        neg.context = sample_context(rec.user, -1, rng);
        neg.item = v;
        neg.rating = 0;
        neg.exposed = true;
        batch.samples.push_back(std::move(neg));
      }
    }
    batch.samples.push_back(std::move(s));
  }

  for (auto i : take(cf_order_, cf_cursor_, cf_per_batch_, kPoolStream, cf_epoch_)) {
    const auto& cf = pool_[i];
    TrainingSample s;
    s.context = sample_context(cf.user, cf.item, rng);
    s.item = cf.item;
    s.rating = cf.voted_rating;
    s.exposed = false;
    add_social_pairs(s, rng);
    batch.samples.push_back(std::move(s));
  }
  return batch;
}

}  // namespace rest
