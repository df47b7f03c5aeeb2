#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rest/checkpoint.hpp"
#include "rest/dataset.hpp"
#include "rest/evaluation.hpp"
#include "rest/graph_store.hpp"
#include "rest/heatmap.hpp"
#include "rest/run_config.hpp"
#include "rest/training.hpp"

namespace rest {

/// Artifacts written by `prepare` and read back by every later command.
struct PreparedData {
  Dataset train, val, test;
  GraphStore graph;
  std::vector<CounterfactualSample> pool;
  std::optional<EvalNegatives> val_negatives, test_negatives;

  const Dataset& split(const std::string& name) const;
  const EvalNegatives* negatives(const std::string& name) const;
  ModelConfig model_config(const ModelConfig& hyper) const;

  static PreparedData load(const std::filesystem::path& dir);
};

struct PrepareSummary {
  LoadSummary load;
  std::size_t users = 0, items = 0, social_edges = 0;
  std::size_t train = 0, val = 0, test = 0, moved_to_train = 0;
  std::size_t pool = 0;
  std::size_t negative_lists = 0, skipped_users = 0, short_lists = 0;
};

/// Builds splits, graph, counterfactual pool and (implicit data) candidate negatives in memory.
PreparedData prepare_data(const Dataset& ds, const RunConfig& cfg, PrepareSummary* summary = nullptr);

struct TrainOutcome {
  TrainResult result;
  TrainConfig config;  // with the selected learning rate
  std::vector<GridCandidate> grid;
};

/// One training run (with the learning-rate grid when enabled) using `seed` as the training seed.
TrainOutcome train_model(const RunConfig& cfg, const PreparedData& data, std::uint64_t seed,
                         const TrainHooks& hooks = {});

Checkpoint make_checkpoint(const RunConfig& cfg, const PreparedData& data, const TrainOutcome& outcome);

/// Loads a checkpoint and checks it against the prepared data and the configured model hyperparameters.
Checkpoint load_matching_checkpoint(const std::filesystem::path& path, const RunConfig& cfg, const PreparedData& data);

// Commands. Each writes under cfg.out_dir and leaves a config.cfg snapshot next to its artifacts.

/// out_dir/prepared: meta.cfg, users.tsv, items.tsv, social.tsv, {train,val,test}.tsv, split.tsv,
/// pool.tsv and for implicit data negatives_{val,test}.tsv.
PrepareSummary cmd_prepare(const RunConfig& cfg, std::ostream& log);

/// out_dir/train: checkpoint.bin, train_log.csv, grid.tsv.
TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& log);

/// out_dir/eval/metrics_<split>.json.
MetricReport cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::string& split,
                      std::ostream& log);

struct SimulateSummary {
  std::size_t tuples = 0;
  std::size_t logged = 0;
  std::size_t social_edges = 0;
  double max_discrepancy = 0.0;
  std::size_t zero_cells = 0;
  double max_selection_bias = 0.0;
};

/// out_dir/simulate: interactions.tsv, social.tsv, ledger.tsv, spec.cfg, oracle_report.txt.
SimulateSummary cmd_simulate(const RunConfig& cfg, std::ostream& log);

/// out_dir/visualize: heatmap.csv and heatmap.png.
StrategyHeatmap cmd_visualize(const RunConfig& cfg, const std::filesystem::path& checkpoint, std::ostream& log);

/// Trains and tests once per seed of cfg.seeds; out_dir/seeds/metrics.json holds mean and sample std.
MetricReport cmd_seeds(const RunConfig& cfg, std::ostream& log);

}  // namespace rest
