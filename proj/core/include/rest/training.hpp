#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rest/dataset.hpp"
#include "rest/graph_store.hpp"
#include "rest/kv_config.hpp"
#include "rest/model.hpp"
#include "rest/rng.hpp"

namespace rest {

/// tau(step) = max(minimum, initial * exp(-decay * step)).
struct TemperatureSchedule {
  double initial = 0.5;
  double minimum = 0.5;
  double decay = 0.0;

  double at(std::int64_t step) const;
  void validate() const;
};

struct TrainConfig {
  std::size_t batch_size = 1024;
  double learning_rate = 0.001;
  std::vector<double> lr_grid = {0.001, 0.0009, 0.0008, 0.0007, 0.0006, 0.0005, 0.0004, 0.0003, 0.0002, 0.0001};
  bool grid_search = false;
  double gamma = 1e-5;
  TemperatureSchedule temperature;
  std::int64_t max_steps = 20000;
  std::int64_t patience_steps = 1500;
  std::int64_t eval_every = 100;
  std::uint64_t seed = 1;

  /// Counterfactual samples per exposed sample in a batch.
  double cf_ratio = 1.0;
  /// Items of C(u) kept per context; 0 keeps all.
  std::size_t item_fanout = 30;
  /// Neighbors of N(u) kept per context; 0 keeps all.
  std::size_t social_fanout = 30;
  /// Observed edges (and as many sampled non-edges) per sample for the social term.
  std::size_t social_pairs = 1;
  /// Sampled unobserved items (r = 0, e = 1) per exposed sample on implicit data.
  std::size_t implicit_negatives = 1;

  void validate() const;
  void to_kv(KeyValueConfig& kv, const std::string& prefix = "train.") const;
  static TrainConfig from_kv(const KeyValueConfig& kv, const std::string& prefix = "train.");
};

/// Keys read by TrainConfig::from_kv, without prefix.
const std::vector<std::string>& train_config_keys();

/// Adam with bias correction, one moment pair per tensor.
class Adam {
 public:
  Adam(const ModelParameters& shape, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);

  void step(ModelParameters& params, const ModelParameters& grad);
  std::int64_t steps() const { return t_; }
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  ModelParameters m_, v_;
};

/// Builds training batches: exposed records in shuffled epochs mixed with counterfactual pool samples.
class BatchAssembler {
 public:
  BatchAssembler(const GraphStore& graph, const Dataset& train, std::span<const CounterfactualSample> pool,
                 const TrainConfig& cfg);

  /// The batch for `step`. Calls must come in increasing step order.
  Batch next(std::int64_t step);

  std::size_t exposed_per_batch() const { return exposed_per_batch_; }
  std::size_t counterfactual_per_batch() const { return cf_per_batch_; }

  /// Context of u: C(u) without `exclude`, both neighborhoods subsampled to the configured fan-outs.
  UserContext sample_context(UserId u, ItemId exclude, Rng& rng) const;

 private:
  std::vector<std::size_t> take(std::vector<std::size_t>& order, std::size_t& cursor, std::size_t count,
                                std::uint64_t stream, std::int64_t& epoch);
  void add_social_pairs(TrainingSample& sample, Rng& rng) const;
  ItemId sample_unobserved_item(UserId u, Rng& rng) const;

  const GraphStore& graph_;
  const Dataset& train_;
  std::span<const CounterfactualSample> pool_;
  TrainConfig cfg_;
  Rng base_;
  std::size_t exposed_per_batch_ = 0;
  std::size_t cf_per_batch_ = 0;
  std::vector<std::size_t> exposed_order_, cf_order_;
  std::size_t exposed_cursor_ = 0, cf_cursor_ = 0;
  std::int64_t exposed_epoch_ = -1, cf_epoch_ = -1;
};

struct TrainLogRow {
  std::int64_t step = 0;
  double kl_s = 0.0;
  double nll_social = 0.0;
  double nll_exposure = 0.0;
  double nll_rating = 0.0;
  double reg = 0.0;  // gamma times the squared norm
  double val_metric = 0.0;

  bool operator==(const TrainLogRow&) const = default;
};

/// `step,kl_s,nll_social,nll_exposure,nll_rating,reg,val_metric` with a header line.
void write_train_log(const std::vector<TrainLogRow>& rows, const std::filesystem::path& path);
std::string format_train_log(const std::vector<TrainLogRow>& rows);

struct TrainInputs {
  const Dataset* train = nullptr;
  const Dataset* val = nullptr;
  const GraphStore* graph = nullptr;
  std::span<const CounterfactualSample> pool;
  /// Candidate lists over `val`; required for implicit data.
  const EvalNegatives* val_negatives = nullptr;
  ModelConfig model;
};

struct TrainHooks {
  /// Replaces the default validation metric (RMSE explicit, HR@20 implicit).
  std::function<double(const RestModel&)> validation_metric;
  std::optional<bool> higher_is_better;
  std::function<void(const TrainLogRow&)> on_log;
};

struct TrainResult {
  RestModel model;  // parameters of the best validation step
  std::int64_t best_step = 0;
  double best_metric = 0.0;
  std::int64_t last_step = 0;
  bool early_stopped = false;
  std::vector<TrainLogRow> log;
};

/// Mean training rating (explicit) used to start the rating heads; 0 for implicit data.
double initial_rating_bias(const Dataset& train);

/// Seed used for parameter initialization given the training seed.
std::uint64_t init_seed(std::uint64_t train_seed);

/// Throws DivergenceError naming the first non-finite loss term.
TrainResult train(const TrainInputs& inputs, const TrainConfig& cfg, const TrainHooks& hooks = {});

struct GridCandidate {
  double learning_rate = 0.0;
  bool diverged = false;
  std::string error;
  double metric = 0.0;
};

struct GridResult {
  std::size_t best = 0;
  std::vector<GridCandidate> candidates;
  TrainConfig best_config;
  std::optional<TrainResult> best_result;
};

/// Trains one run per learning rate of cfg.lr_grid and keeps the best validation score.
/// Diverged runs rank last; ties go to the smaller learning rate.
GridResult grid_search(const TrainInputs& inputs, const TrainConfig& cfg, const TrainHooks& hooks = {});

}  // namespace rest
