#include "rest/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "rest/errors.hpp"
#include "rest/evaluation.hpp"

namespace rest {

double TemperatureSchedule::at(std::int64_t step) const {
  return std::max(minimum, initial * std::exp(-decay * static_cast<double>(step)));
}

void TemperatureSchedule::validate() const {
  if (!(initial > 0.0) || !(minimum > 0.0)) throw ValidationError("temperatures must be positive");
  if (minimum > initial) throw ValidationError("minimum temperature exceeds the initial temperature");
  if (decay < 0.0) throw ValidationError("temperature decay must be non-negative");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(gamma >= 0.0)) throw ValidationError("gamma must be non-negative");
  if (max_steps < 0) throw ValidationError("max_steps must be non-negative");
  if (patience_steps < 1) throw ValidationError("patience must be at least 1 step");
  if (eval_every < 1) throw ValidationError("eval_every must be at least 1");
  if (!(cf_ratio >= 0.0)) throw ValidationError("cf_ratio must be non-negative");
  temperature.validate();
  if (grid_search) {
    if (lr_grid.empty()) throw ValidationError("grid search needs at least one learning rate");
    for (double lr : lr_grid)
      if (!(lr > 0.0)) throw ValidationError("grid learning rates must be positive");
  }
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = {
      "batch_size", "lr",        "lr_grid",     "grid_search", "gamma",       "tau",
      "tau_min",    "tau_decay", "max_steps",   "patience",    "eval_every",  "seed",
      "cf_ratio",   "item_fanout", "social_fanout", "social_pairs", "implicit_negatives"};
  return keys;
}

void TrainConfig::to_kv(KeyValueConfig& kv, const std::string& p) const {
  kv.set_int(p + "batch_size", static_cast<std::int64_t>(batch_size));
  kv.set_double(p + "lr", learning_rate);
  kv.set_doubles(p + "lr_grid", lr_grid);
  kv.set(p + "grid_search", grid_search ? "true" : "false");
  kv.set_double(p + "gamma", gamma);
  kv.set_double(p + "tau", temperature.initial);
  kv.set_double(p + "tau_min", temperature.minimum);
  kv.set_double(p + "tau_decay", temperature.decay);
  kv.set_int(p + "max_steps", max_steps);
  kv.set_int(p + "patience", patience_steps);
  kv.set_int(p + "eval_every", eval_every);
  kv.set(p + "seed", std::to_string(seed));
  kv.set_double(p + "cf_ratio", cf_ratio);
  kv.set_int(p + "item_fanout", static_cast<std::int64_t>(item_fanout));
  kv.set_int(p + "social_fanout", static_cast<std::int64_t>(social_fanout));
  kv.set_int(p + "social_pairs", static_cast<std::int64_t>(social_pairs));
  kv.set_int(p + "implicit_negatives", static_cast<std::int64_t>(implicit_negatives));
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv, const std::string& p) {
  auto count = [&](const std::string& key, std::size_t fallback) {
    const auto v = kv.get_int(p + key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ValidationError(p + key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  TrainConfig c;
  c.batch_size = count("batch_size", c.batch_size);
  c.learning_rate = kv.get_double(p + "lr", c.learning_rate);
  c.lr_grid = kv.get_doubles(p + "lr_grid", c.lr_grid);
  c.grid_search = kv.get_bool(p + "grid_search", c.grid_search);
  c.gamma = kv.get_double(p + "gamma", c.gamma);
  c.temperature.initial = kv.get_double(p + "tau", c.temperature.initial);
  c.temperature.minimum = kv.get_double(p + "tau_min", c.temperature.initial);
  c.temperature.decay = kv.get_double(p + "tau_decay", c.temperature.decay);
  c.max_steps = kv.get_int(p + "max_steps", c.max_steps);
  c.patience_steps = kv.get_int(p + "patience", c.patience_steps);
  c.eval_every = kv.get_int(p + "eval_every", c.eval_every);
  c.seed = static_cast<std::uint64_t>(kv.get_int(p + "seed", static_cast<std::int64_t>(c.seed)));
  c.cf_ratio = kv.get_double(p + "cf_ratio", c.cf_ratio);
  c.item_fanout = count("item_fanout", c.item_fanout);
  c.social_fanout = count("social_fanout", c.social_fanout);
  c.social_pairs = count("social_pairs", c.social_pairs);
  c.implicit_negatives = count("implicit_negatives", c.implicit_negatives);
  return c;
}

std::string format_train_log(const std::vector<TrainLogRow>& rows) {
  std::string out = "step,kl_s,nll_social,nll_exposure,nll_rating,reg,val_metric\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(r.step),
                  r.kl_s, r.nll_social, r.nll_exposure, r.nll_rating, r.reg, r.val_metric);
    out += buf;
  }
  return out;
}

void write_train_log(const std::vector<TrainLogRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << format_train_log(rows);
}

double initial_rating_bias(const Dataset& train) {
  if (train.feedback_kind == FeedbackKind::kImplicit || train.interactions.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : train.interactions) sum += r.rating;
  return sum / static_cast<double>(train.interactions.size());
}

std::uint64_t init_seed(std::uint64_t train_seed) { return splitmix64(train_seed ^ 0x5eed5eed5eed5eedULL); }

namespace {

void check_term(double value, const char* name, std::int64_t step) {
  if (!std::isfinite(value)) throw DivergenceError(name, step);
}

}  // namespace

TrainResult train(const TrainInputs& in, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (!in.train || !in.val || !in.graph) throw ValidationError("training needs train, val and graph inputs");
  const bool implicit = in.model.feedback_kind == FeedbackKind::kImplicit;
  if (!hooks.validation_metric && implicit && !in.val_negatives)
    throw ValidationError("implicit validation needs candidate negatives");

  RestModel model(in.model, init_seed(cfg.seed), initial_rating_bias(*in.train));
  const bool higher_better = hooks.higher_is_better.value_or(hooks.validation_metric ? false : implicit);
  auto validate = [&]() -> double {
    if (hooks.validation_metric) return hooks.validation_metric(model);
    if (implicit) return evaluate(model, *in.graph, *in.val, in.val_negatives, {20}).at("hr@20").mean;
    return evaluate(model, *in.graph, *in.val, nullptr, {}).at("rmse").mean;
  };
  auto better = [&](double a, double b) { return higher_better ? a > b : a < b; };

  BatchAssembler assembler(*in.graph, *in.train, in.pool, cfg);
  Adam adam(model.params(), cfg.learning_rate);
  ModelParameters grad = ModelParameters::zeros(model.config());
  const Rng noise_base = Rng(cfg.seed).derive(0x6e6f697365ULL);

  TrainResult result{model, 0, 0.0, 0, false, {}};
  bool have_best = false;

  for (std::int64_t step = 0;; ++step) {
    const bool eval_step = step % cfg.eval_every == 0 || step == cfg.max_steps;
    const Batch batch = assembler.next(step);
    Rng noise = noise_base.derive(static_cast<std::uint64_t>(step));
    grad.set_zero();
    const bool update = step < cfg.max_steps;
    const LossTerms terms =
        model.loss_terms(batch, cfg.temperature.at(step), cfg.gamma, noise, update ? &grad : nullptr);
    check_term(terms.kl_strategy, "kl_s", step);
    check_term(terms.nll_social, "nll_social", step);
    check_term(terms.nll_exposure, "nll_exposure", step);
    check_term(terms.nll_rating, "nll_rating", step);
    check_term(terms.regularizer, "reg", step);

    if (eval_step) {
      const double metric = validate();
      check_term(metric, "val_metric", step);
      TrainLogRow row{step, terms.kl_strategy, terms.nll_social, terms.nll_exposure, terms.nll_rating,
                      terms.gamma * terms.regularizer, metric};
      result.log.push_back(row);
      if (hooks.on_log) hooks.on_log(row);
      if (!have_best || better(metric, result.best_metric)) {
        have_best = true;
        result.best_metric = metric;
        result.best_step = step;
        result.model = model;
      } else if (step - result.best_step >= cfg.patience_steps) {
        result.early_stopped = true;
        result.last_step = step;
        break;
      }
    }
    if (!update) {
      result.last_step = step;
      break;
    }
    adam.step(model.params(), grad);
    if (!model.params().all_finite()) throw DivergenceError("parameters", step + 1);
  }
  return result;
}

GridResult grid_search(const TrainInputs& inputs, const TrainConfig& cfg, const TrainHooks& hooks) {
  std::vector<double> grid = cfg.grid_search ? cfg.lr_grid : std::vector<double>{cfg.learning_rate};
  if (grid.empty()) throw ValidationError("grid search needs at least one learning rate");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const bool implicit = inputs.model.feedback_kind == FeedbackKind::kImplicit;
  const bool higher_better = hooks.higher_is_better.value_or(hooks.validation_metric ? false : implicit);

  GridResult out;
  std::optional<std::size_t> best;
  for (double lr : grid) {
    TrainConfig c = cfg;
    c.learning_rate = lr;
    c.grid_search = false;
    GridCandidate cand;
    cand.learning_rate = lr;
    std::optional<TrainResult> r;
    try {
      r = train(inputs, c, hooks);
      cand.metric = r->best_metric;
    } catch (const DivergenceError& e) {
      cand.diverged = true;
      cand.error = e.what();
    }
    out.candidates.push_back(cand);
    if (cand.diverged) continue;
    // Grid is ascending, so strict improvement keeps the smaller rate on ties.
    const auto& cur = out.candidates.back();
    if (!best || (higher_better ? cur.metric > out.candidates[*best].metric
                                : cur.metric < out.candidates[*best].metric)) {
      best = out.candidates.size() - 1;
      out.best_result = std::move(r);
    }
  }
  if (!best) throw ValidationError("every learning rate in the grid diverged");
  out.best = *best;
  out.best_config = cfg;
  out.best_config.learning_rate = out.candidates[*best].learning_rate;
  out.best_config.grid_search = false;
  return out;
}

}  // namespace rest
