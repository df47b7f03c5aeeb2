#include "rest/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rest/errors.hpp"

namespace rest {
namespace {

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("prediction and target lengths differ");
  if (a.empty()) throw ValidationError("metrics need at least one prediction");
}

}  // namespace

double mae(std::span<const double> predictions, std::span<const double> targets) {
  check_lengths(predictions, targets);
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) sum += std::abs(predictions[i] - targets[i]);
  return sum / static_cast<double>(predictions.size());
}

double rmse(std::span<const double> predictions, std::span<const double> targets) {
  check_lengths(predictions, targets);
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(predictions.size()));
}

std::vector<ItemId> rank_candidates(std::span<const ItemId> items, std::span<const double> scores) {
  if (items.size() != scores.size()) throw ValidationError("candidate and score lengths differ");
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return items[a] < items[b];
  });
  std::vector<ItemId> ranked;
  ranked.reserve(items.size());
  for (auto i : order) ranked.push_back(items[i]);
  return ranked;
}

std::size_t rank_of(std::span<const ItemId> ranked, ItemId positive) {
  auto it = std::find(ranked.begin(), ranked.end(), positive);
  if (it == ranked.end()) throw ValidationError("positive item is not among the candidates");
  return static_cast<std::size_t>(it - ranked.begin()) + 1;
}

double hr_at_k(std::span<const ItemId> ranked, ItemId positive, std::size_t k) {
  return rank_of(ranked, positive) <= k ? 1.0 : 0.0;
}

double ndcg_at_k(std::span<const ItemId> ranked, ItemId positive, std::size_t k) {
  const auto rank = rank_of(ranked, positive);
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

}  // namespace rest
