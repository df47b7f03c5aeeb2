#include "rest/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rest/errors.hpp"
#include "rest/metrics.hpp"

namespace rest {

const MetricValue& MetricReport::at(const std::string& name) const {
  auto it = metrics.find(name);
  if (it == metrics.end()) throw ValidationError("metric '" + name + "' not in report");
  return it->second;
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& [name, value] : metrics) j[name] = {{"mean", value.mean}, {"std", value.std}};
  j["k"] = ks;
  j["records"] = records;
  j["users"] = users;
  j["runs"] = runs;
  return j.dump(2) + "\n";
}

void MetricReport::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_json();
}

MetricReport MetricReport::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  const auto j = nlohmann::json::parse(in);
  MetricReport r;
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) r.metrics[key] = {value.at("mean").get<double>(), value.at("std").get<double>()};
  }
  r.ks = j.value("k", std::vector<int>{});
  r.records = j.value("records", std::size_t{0});
  r.users = j.value("users", std::size_t{0});
  r.runs = j.value("runs", std::size_t{1});
  return r;
}

MetricReport MetricReport::aggregate(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw ValidationError("nothing to aggregate");
  MetricReport out;
  out.ks = reports.front().ks;
  out.records = reports.front().records;
  out.users = reports.front().users;
  out.runs = reports.size();
  for (const auto& [name, unused] : reports.front().metrics) {
    (void)unused;
    std::vector<double> values;
    for (const auto& r : reports) values.push_back(r.at(name).mean);
    // Summing sorted values makes the mean independent of run order.
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
    out.metrics[name] = {mean, sd};
  }
  return out;
}

MetricReport evaluate_ratings(const RatingPredictor& predict, const Dataset& eval) {
  if (eval.interactions.empty()) throw ValidationError("evaluation split is empty");
  std::vector<double> preds, targets;
  std::set<UserId> users;
  preds.reserve(eval.interactions.size());
  targets.reserve(eval.interactions.size());
  for (const auto& r : eval.interactions) {
    preds.push_back(predict(r.user, r.item));
    targets.push_back(static_cast<double>(r.rating));
    users.insert(r.user);
  }
  MetricReport report;
  report.metrics["mae"] = {mae(preds, targets), 0.0};
  report.metrics["rmse"] = {rmse(preds, targets), 0.0};
  report.records = preds.size();
  report.users = users.size();
  return report;
}

MetricReport evaluate_ranking(const RankingScorer& score, const EvalNegatives& negatives, const std::vector<int>& ks) {
  if (negatives.lists.empty()) throw ValidationError("no candidate lists to evaluate");
  if (ks.empty()) throw ValidationError("no K values requested");
  std::vector<double> hr(ks.size(), 0.0), ndcg(ks.size(), 0.0);
  std::set<UserId> users;
  std::vector<double> scores;
  for (const auto& list : negatives.lists) {
    scores = score(list.user, list.items);
    const auto ranked = rank_candidates(list.items, scores);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const auto k = static_cast<std::size_t>(ks[i]);
      hr[i] += hr_at_k(ranked, list.positive, k);
      ndcg[i] += ndcg_at_k(ranked, list.positive, k);
    }
    users.insert(list.user);
  }
  MetricReport report;
  const double n = static_cast<double>(negatives.lists.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    report.metrics["hr@" + std::to_string(ks[i])] = {hr[i] / n, 0.0};
    report.metrics["ndcg@" + std::to_string(ks[i])] = {ndcg[i] / n, 0.0};
  }
  report.ks = ks;
  report.records = negatives.lists.size();
  report.users = users.size();
  return report;
}

MetricReport evaluate(const RestModel& model, const GraphStore& graph, const Dataset& eval,
                      const EvalNegatives* negatives, const std::vector<int>& ks) {
  if (model.config().feedback_kind == FeedbackKind::kExplicit) {
    return evaluate_ratings([&](UserId u, ItemId v) { return model.predict_for_eval(graph, u, v); }, eval);
  }
  if (!negatives) throw ValidationError("implicit evaluation needs candidate negatives");
  return evaluate_ranking(
      [&](UserId u, std::span<const ItemId> items) { return model.score_candidates(graph, u, items); }, *negatives,
      ks);
}

}  // namespace rest
