// rest: prepare data, train, evaluate, simulate and visualize from one entry point.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rest/errors.hpp"
#include "rest/kv_config.hpp"
#include "rest/pipeline.hpp"
#include "rest/run_config.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("-c,--config", c.config, "key = value run configuration file");
  if (config_required) opt->required();
  opt->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", c.overrides, "override a config key, e.g. --set train.lr=0.0005")->allow_extra_args(false);
}

rest::RunConfig resolve(const Common& c, const std::vector<std::string>& extra) {
  rest::KeyValueConfig kv;
  if (!c.config.empty()) kv = rest::KeyValueConfig::load(c.config);
  for (const auto& o : c.overrides) kv.apply_override(o);
  for (const auto& o : extra) kv.apply_override(o);
  return rest::RunConfig::from_kv(kv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exposure-aware social recommender: data preparation, training, evaluation and simulation"};
  app.require_subcommand(1);

  Common prepare_opts, train_opts, eval_opts, sim_opts, viz_opts, seeds_opts;
  std::string checkpoint, split = "test", grouping, ablation, spec;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  bool grid = false;

  auto* prepare = app.add_subcommand("prepare", "split the data, build the counterfactual pool and eval negatives");
  add_common(prepare, prepare_opts, true);

  auto* train = app.add_subcommand("train", "train a model on prepared data and write a checkpoint");
  add_common(train, train_opts, true);
  train->add_option("--ablation", ablation, "full or rest-s")->check(CLI::IsMember({"full", "rest-s"}));
  train->add_option("--seed", seed, "training seed");
  train->add_option("--lr", lr, "learning rate (ignored with --grid-search)");
  train->add_flag("--grid-search", grid, "search train.lr_grid and keep the best validation score");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a prepared split");
  add_common(eval, eval_opts, true);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", split, "val or test")->check(CLI::IsMember({"val", "test"}));

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset and the adjustment-identity report");
  add_common(simulate, sim_opts, false);
  simulate->add_option("--spec", spec, "structural model spec file (default: built-in regime spec)")
      ->check(CLI::ExistingFile);

  auto* visualize = app.add_subcommand("visualize", "render per-group strategy codes as CSV and PNG");
  add_common(visualize, viz_opts, true);
  visualize->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  visualize->add_option("--grouping", grouping, "window:N, date or labels");

  auto* seeds = app.add_subcommand("seeds", "train and test once per run.seeds entry, report mean and std");
  add_common(seeds, seeds_opts, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) {
      rest::cmd_prepare(resolve(prepare_opts, {}), std::cout);
    } else if (*train) {
      std::vector<std::string> extra;
      if (!ablation.empty()) extra.push_back("model.ablation=" + ablation);
      if (seed) extra.push_back("train.seed=" + std::to_string(*seed));
      if (lr) extra.push_back("train.lr=" + rest::format_double(*lr));
      if (grid) extra.push_back("train.grid_search=true");
      rest::cmd_train(resolve(train_opts, extra), std::cout);
    } else if (*eval) {
      rest::cmd_eval(resolve(eval_opts, {}), checkpoint, split, std::cout);
    } else if (*simulate) {
      std::vector<std::string> extra;
      if (!spec.empty()) extra.push_back("scm.spec=" + spec);
      rest::cmd_simulate(resolve(sim_opts, extra), std::cout);
    } else if (*visualize) {
      std::vector<std::string> extra;
      if (!grouping.empty()) extra.push_back("viz.grouping=" + grouping);
      rest::cmd_visualize(resolve(viz_opts, extra), checkpoint, std::cout);
    } else if (*seeds) {
      rest::cmd_seeds(resolve(seeds_opts, {}), std::cout);
    }
  } catch (const rest::DivergenceError& e) {
    std::cerr << "error: training diverged: " << e.what() << "\n";
    return 3;
  } catch (const rest::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
