#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rest/dataset.hpp"
#include "rest/graph_store.hpp"
#include "rest/model.hpp"

namespace rest {

struct MetricValue {
  double mean = 0.0;
  double std = 0.0;

  bool operator==(const MetricValue&) const = default;
};

/// Named metrics (`mae`, `rmse`, `hr@K`, `ndcg@K`) with mean and standard deviation over runs.
struct MetricReport {
  std::map<std::string, MetricValue> metrics;
  std::vector<int> ks;
  std::size_t records = 0;
  std::size_t users = 0;
  std::size_t runs = 1;

  const MetricValue& at(const std::string& name) const;

  std::string to_json() const;
  void save(const std::filesystem::path& path) const;
  static MetricReport load(const std::filesystem::path& path);

  /// Mean and sample standard deviation of each metric across `reports`.
  static MetricReport aggregate(const std::vector<MetricReport>& reports);
};

using RatingPredictor = std::function<double(UserId, ItemId)>;
/// Scores every candidate of one user's list.
using RankingScorer = std::function<std::vector<double>(UserId, std::span<const ItemId>)>;

/// MAE/RMSE of `predict` over every record of `eval`.
MetricReport evaluate_ratings(const RatingPredictor& predict, const Dataset& eval);

/// Averaged HR@K and NDCG@K over candidate lists, ranking by `score` with ties to the smaller item id.
MetricReport evaluate_ranking(const RankingScorer& score, const EvalNegatives& negatives, const std::vector<int>& ks);

/// Explicit feedback: MAE/RMSE via predict_for_eval. Implicit: ranking metrics over `negatives`.
MetricReport evaluate(const RestModel& model, const GraphStore& graph, const Dataset& eval,
                      const EvalNegatives* negatives, const std::vector<int>& ks);

}  // namespace rest
