#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rest/dataset.hpp"

namespace rest {

double mae(std::span<const double> predictions, std::span<const double> targets);
double rmse(std::span<const double> predictions, std::span<const double> targets);

/// Candidates ordered by descending score; equal scores keep ascending item id order.
std::vector<ItemId> rank_candidates(std::span<const ItemId> items, std::span<const double> scores);

/// 1-based position of `positive` in `ranked`. Throws ValidationError if absent.
std::size_t rank_of(std::span<const ItemId> ranked, ItemId positive);

/// 1 when the positive is within the top k of `ranked`, else 0.
double hr_at_k(std::span<const ItemId> ranked, ItemId positive, std::size_t k);

/// 1 / log2(rank + 1) when the positive is within the top k, else 0.
double ndcg_at_k(std::span<const ItemId> ranked, ItemId positive, std::size_t k);

}  // namespace rest
