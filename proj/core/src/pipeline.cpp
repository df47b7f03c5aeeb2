#include "rest/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rest/errors.hpp"
#include "rest/scm.hpp"

namespace rest {
namespace {

namespace fs = std::filesystem;

void snapshot(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  cfg.save(dir / "config.cfg");
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::vector<std::string> read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    labels.push_back(line);
  }
  return labels;
}

}  // namespace

const Dataset& PreparedData::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ValidationError("unknown split '" + name + "'");
}

const EvalNegatives* PreparedData::negatives(const std::string& name) const {
  if (name == "val") return val_negatives ? &*val_negatives : nullptr;
  if (name == "test") return test_negatives ? &*test_negatives : nullptr;
  return nullptr;
}

ModelConfig PreparedData::model_config(const ModelConfig& hyper) const {
  ModelConfig m = hyper;
  m.num_users = train.num_users;
  m.num_items = train.num_items;
  m.rating_levels = train.rating_levels;
  m.feedback_kind = train.feedback_kind;
  m.validate();
  return m;
}

PreparedData PreparedData::load(const fs::path& dir) {
  if (!fs::exists(dir / "meta.cfg")) throw ValidationError("no prepared data in " + dir.string() + "; run prepare");
  PreparedData d;
  d.train = load_prepared(dir, "train");
  d.val = load_prepared(dir, "val");
  d.test = load_prepared(dir, "test");
  d.graph = GraphStore(d.train);
  d.pool = load_pool_tsv(dir / "pool.tsv");
  if (fs::exists(dir / "negatives_val.tsv")) d.val_negatives = load_negatives(dir / "negatives_val.tsv");
  if (fs::exists(dir / "negatives_test.tsv")) d.test_negatives = load_negatives(dir / "negatives_test.tsv");
  return d;
}

PreparedData prepare_data(const Dataset& ds, const RunConfig& cfg, PrepareSummary* summary) {
  cfg.validate();
  ds.validate();
  PrepareSummary local;
  PrepareSummary& s = summary ? *summary : local;

  auto split = split_dataset(ds, cfg.split);
  PreparedData d;
  d.train = std::move(split.train);
  d.val = std::move(split.val);
  d.test = std::move(split.test);
  d.graph = GraphStore(d.train);
  PoolOptions po;
  po.beta = cfg.beta;
  if (cfg.cap_per_user > 0) po.cap_per_user = cfg.cap_per_user;
  po.seed = cfg.pool_seed;
  d.pool = build_counterfactual_pool(d.graph, po);

  if (ds.feedback_kind == FeedbackKind::kImplicit) {
    const std::vector<const Dataset*> history = {&d.train, &d.val, &d.test};
    if (!d.val.interactions.empty())
      d.val_negatives = sample_eval_negatives(history, d.val, cfg.eval_negatives, cfg.eval_seed);
    if (!d.test.interactions.empty())
      d.test_negatives = sample_eval_negatives(history, d.test, cfg.eval_negatives, cfg.eval_seed + 1);
    for (const auto* n : {&d.val_negatives, &d.test_negatives}) {
      if (!*n) continue;
      s.negative_lists += (*n)->lists.size();
      s.skipped_users += (*n)->skipped;
      s.short_lists += (*n)->short_lists;
    }
  }

  s.users = static_cast<std::size_t>(ds.num_users);
  s.items = static_cast<std::size_t>(ds.num_items);
  s.social_edges = ds.social_edges.size() / 2;
  s.train = d.train.interactions.size();
  s.val = d.val.interactions.size();
  s.test = d.test.interactions.size();
  s.moved_to_train = split.moved_to_train;
  s.pool = d.pool.size();
  return d;
}

TrainOutcome train_model(const RunConfig& cfg, const PreparedData& data, std::uint64_t seed,
                         const TrainHooks& hooks) {
  TrainInputs in;
  in.train = &data.train;
  in.val = &data.val;
  in.graph = &data.graph;
  in.pool = data.pool;
  in.val_negatives = data.negatives("val");
  in.model = data.model_config(cfg.model);
  if (data.val.interactions.empty() && !hooks.validation_metric)
    throw ValidationError("validation split is empty; raise split.val");

  TrainConfig tc = cfg.train;
  tc.seed = seed;
  auto grid = grid_search(in, tc, hooks);
  return TrainOutcome{std::move(*grid.best_result), grid.best_config, std::move(grid.candidates)};
}

Checkpoint make_checkpoint(const RunConfig& cfg, const PreparedData& data, const TrainOutcome& outcome) {
  Checkpoint ck{outcome.result.model.config(), outcome.result.model.params(), cfg.to_kv(), data.train.users,
                data.train.items, outcome.result.best_step, outcome.result.best_metric};
  outcome.config.to_kv(ck.run_config);
  return ck;
}

Checkpoint load_matching_checkpoint(const fs::path& path, const RunConfig& cfg, const PreparedData& data) {
  Checkpoint ck = load_checkpoint(path);
  const ModelConfig expected = data.model_config(cfg.model);
  if (!(ck.model_config == expected))
    throw ValidationError("checkpoint " + path.string() +
                          " was trained with a different model configuration or dataset than the current config");
  if (!(ck.users == data.train.users) || !(ck.items == data.train.items))
    throw ValidationError("checkpoint id maps do not match the prepared data");
  return ck;
}

PrepareSummary cmd_prepare(const RunConfig& cfg, std::ostream& log) {
  cfg.validate_inputs();
  LoadOptions lo;
  lo.interactions = cfg.interactions;
  lo.social = cfg.social;
  lo.format = cfg.format;
  lo.rating_levels = cfg.rating_levels;
  PrepareSummary s;
  const Dataset ds = load_dataset(lo, &s.load);
  const auto split = split_dataset(ds, cfg.split);
  PreparedData d = prepare_data(ds, cfg, &s);

  const fs::path dir = cfg.prepared_dir();
  fs::create_directories(dir);
  save_prepared(d.train, dir, "train");
  save_interactions_tsv(d.val, dir / "val.tsv");
  save_interactions_tsv(d.test, dir / "test.tsv");
  split.save_manifest(dir / "split.tsv");
  save_pool_tsv(d.pool, dir / "pool.tsv");
  if (d.val_negatives) save_negatives(*d.val_negatives, dir / "negatives_val.tsv");
  if (d.test_negatives) save_negatives(*d.test_negatives, dir / "negatives_test.tsv");
  snapshot(cfg, dir);

  log << "read " << s.load.lines_read << " lines (" << s.load.duplicates_replaced << " duplicates replaced, "
      << s.load.social_edges_dropped << " social edges dropped)\n"
      << "users " << s.users << ", items " << s.items << ", social edges " << s.social_edges << "\n"
      << "split train " << s.train << ", val " << s.val << ", test " << s.test << " (" << s.moved_to_train
      << " moved to train)\n"
      << "counterfactual pool " << s.pool << "\n";
  if (cfg.format == TsvFormat::kImplicit)
    log << "candidate lists " << s.negative_lists << " (" << s.skipped_users << " skipped, " << s.short_lists
        << " short)\n";
  log << "wrote " << dir.string() << "\n";
  return s;
}

TrainOutcome cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const PreparedData data = PreparedData::load(cfg.prepared_dir());
  TrainHooks hooks;
  hooks.on_log = [&](const TrainLogRow& r) {
    log << "step " << r.step << "  kl_s " << fmt(r.kl_s) << "  social " << fmt(r.nll_social) << "  exposure "
        << fmt(r.nll_exposure) << "  rating " << fmt(r.nll_rating) << "  reg " << fmt(r.reg) << "  val "
        << fmt(r.val_metric) << "\n";
  };
  TrainOutcome out = train_model(cfg, data, cfg.train.seed, hooks);

  const fs::path dir = cfg.out_dir / "train";
  snapshot(cfg, dir);
  save_checkpoint(make_checkpoint(cfg, data, out), dir / "checkpoint.bin");
  write_train_log(out.result.log, dir / "train_log.csv");
  {
    std::ofstream g(dir / "grid.tsv", std::ios::binary);
    g << "lr\tdiverged\tval_metric\n";
    for (const auto& c : out.grid)
      g << format_double(c.learning_rate) << '\t' << (c.diverged ? 1 : 0) << '\t'
        << (c.diverged ? std::string("nan") : format_double(c.metric)) << '\n';
  }
  log << "best val " << fmt(out.result.best_metric) << " at step " << out.result.best_step << " (lr "
      << format_double(out.config.learning_rate) << ")\n"
      << "wrote " << (dir / "checkpoint.bin").string() << "\n";
  return out;
}

MetricReport cmd_eval(const RunConfig& cfg, const fs::path& checkpoint, const std::string& split, std::ostream& log) {
  cfg.validate();
  const PreparedData data = PreparedData::load(cfg.prepared_dir());
  const Checkpoint ck = load_matching_checkpoint(checkpoint, cfg, data);
  const RestModel model = ck.model();
  const Dataset& eval = data.split(split);
  const auto report = evaluate(model, data.graph, eval, data.negatives(split), cfg.eval_ks);

  const fs::path dir = cfg.out_dir / "eval";
  snapshot(cfg, dir);
  const fs::path out = dir / ("metrics_" + split + ".json");
  report.save(out);
  for (const auto& [name, v] : report.metrics) log << name << " " << fmt(v.mean) << "\n";
  log << "wrote " << out.string() << "\n";
  return report;
}

SimulateSummary cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const ScmSpec spec = cfg.scm_spec ? ScmSpec::load(*cfg.scm_spec) : regime_scm_spec();
  const SyntheticDataset syn = generate(spec);
  SimulateSummary s;
  s.tuples = syn.tuples_sampled;
  s.logged = syn.dataset.interactions.size();
  s.social_edges = syn.dataset.social_edges.size() / 2;

  std::ostringstream report;
  report << "# g\tv\tmax_abs_difference\tzero_cells\tselection_bias_tv\n";
  for (int g = 0; g < spec.g_size; ++g)
    for (int v = 0; v < spec.v_size; ++v) {
      const auto res = exact_interventional(spec, g, v);
      s.zero_cells += res.zero_cells.size();
      double bias = 0.0;
      bool observable = true;
      try {
        bias = measure_selection_bias(spec, g, v);
      } catch (const ValidationError&) {
        observable = false;
      }
      if (res.comparable()) s.max_discrepancy = std::max(s.max_discrepancy, res.max_abs_difference());
      if (observable) s.max_selection_bias = std::max(s.max_selection_bias, bias);
      report << g << '\t' << v << '\t' << (res.comparable() ? format_double(res.max_abs_difference()) : "excluded")
             << '\t' << res.zero_cells.size() << '\t' << (observable ? format_double(bias) : "unobservable") << '\n';
    }

  const fs::path dir = cfg.out_dir / "simulate";
  snapshot(cfg, dir);
  syn.save(dir);
  spec.save(dir / "spec.cfg");
  {
    std::ofstream out(dir / "oracle_report.txt", std::ios::binary);
    if (!out) throw ValidationError("cannot write oracle report");
    out << "max_adjustment_discrepancy = " << format_double(s.max_discrepancy) << "\n"
        << "zero_cells = " << s.zero_cells << "\n"
        << "max_selection_bias_tv = " << format_double(s.max_selection_bias) << "\n"
        << report.str();
  }
  log << "sampled " << s.tuples << " tuples, logged " << s.logged << " exposed interactions, " << s.social_edges
      << " social edges\n"
      << "max adjustment discrepancy " << format_double(s.max_discrepancy) << ", max selection bias "
      << fmt(s.max_selection_bias) << "\n"
      << "wrote " << dir.string() << "\n";
  return s;
}

StrategyHeatmap cmd_visualize(const RunConfig& cfg, const fs::path& checkpoint, std::ostream& log) {
  cfg.validate();
  const PreparedData data = PreparedData::load(cfg.prepared_dir());
  const Checkpoint ck = load_matching_checkpoint(checkpoint, cfg, data);
  const RestModel model = ck.model();
  const Dataset& ds = data.split(cfg.viz_split);
  Grouping grouping = Grouping::parse(cfg.viz_grouping);
  if (grouping.kind == Grouping::Kind::kLabels) {
    if (!cfg.viz_labels) throw ValidationError("label grouping needs viz.labels");
    grouping.labels = read_labels(*cfg.viz_labels);
  }
  const auto hm = build_heatmap(model, data.graph, ds.interactions, grouping);

  const fs::path dir = cfg.out_dir / "visualize";
  snapshot(cfg, dir);
  hm.save_csv(dir / "heatmap.csv");
  if (!hm.rows.empty()) hm.save_png(dir / "heatmap.png", cfg.viz_cell);
  for (const auto& g : hm.omitted) log << "warning: group " << g << " has no interactions; row omitted\n";
  log << hm.rows.size() << " groups x " << hm.blocks * hm.categories << " dimensions\n"
      << "wrote " << (dir / "heatmap.csv").string() << "\n";
  return hm;
}

MetricReport cmd_seeds(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const PreparedData data = PreparedData::load(cfg.prepared_dir());
  const fs::path dir = cfg.out_dir / "seeds";
  snapshot(cfg, dir);
  std::vector<MetricReport> reports;
  for (auto seed : cfg.seeds) {
    const TrainOutcome out = train_model(cfg, data, seed);
    const fs::path sd = dir / ("seed_" + std::to_string(seed));
    fs::create_directories(sd);
    save_checkpoint(make_checkpoint(cfg, data, out), sd / "checkpoint.bin");
    write_train_log(out.result.log, sd / "train_log.csv");
    auto report = evaluate(out.result.model, data.graph, data.test, data.negatives("test"), cfg.eval_ks);
    report.save(sd / "metrics_test.json");
    log << "seed " << seed << ":";
    for (const auto& [name, v] : report.metrics) log << " " << name << " " << fmt(v.mean);
    log << "\n";
    reports.push_back(std::move(report));
  }
  const auto agg = MetricReport::aggregate(reports);
  agg.save(dir / "metrics.json");
  for (const auto& [name, v] : agg.metrics) log << name << " " << fmt(v.mean) << " +- " << fmt(v.std) << "\n";
  log << "wrote " << (dir / "metrics.json").string() << "\n";
  return agg;
}

}  // namespace rest
