#include "rest/run_config.hpp"

#include <algorithm>

#include "rest/errors.hpp"
#include "rest/heatmap.hpp"

namespace rest {
namespace {

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k = {
        "data.interactions", "data.social",   "data.format",       "data.rating_levels", "split.train",
        "split.val",         "split.test",    "split.seed",        "eval.negatives",     "eval.k",
        "eval.seed",         "graph.beta",    "graph.cap_per_user", "graph.seed",        "model.dim",
        "model.rating_dim",  "model.hidden",  "model.blocks",      "model.categories",   "model.social_agg",
        "model.ablation",    "run.out_dir",   "run.seeds",         "viz.grouping",       "viz.split",
        "viz.labels",        "viz.cell",      "scm.spec"};
    for (const auto& t : train_config_keys()) k.push_back("train." + t);
    return k;
  }();
  return keys;
}

std::size_t non_negative(const KeyValueConfig& kv, const std::string& key, std::size_t fallback) {
  const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ValidationError(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

void RunConfig::validate() const {
  if (format == TsvFormat::kExplicit && rating_levels < 1) throw ValidationError("data.rating_levels must be positive");
  split.validate();
  if (eval_ks.empty()) throw ValidationError("eval.k needs at least one value");
  for (int k : eval_ks)
    if (k < 1) throw ValidationError("eval.k values must be positive");
  if (format == TsvFormat::kImplicit) {
    for (int k : eval_ks)
      if (static_cast<std::size_t>(k) > eval_negatives + 1)
        throw ValidationError("eval.k exceeds the candidate list length");
  }
  if (beta < 1) throw ValidationError("graph.beta must be at least 1");
  if (model.dim < 1 || model.rating_dim < 1 || model.hidden < 0) throw ValidationError("model dimensions must be positive");
  if (model.blocks < 1 || model.categories < 2) throw ValidationError("strategy code needs >= 1 block of >= 2 categories");
  train.validate();
  if (seeds.empty()) throw ValidationError("run.seeds needs at least one seed");
  if (viz_split != "train" && viz_split != "val" && viz_split != "test")
    throw ValidationError("viz.split must be train, val or test");
  Grouping::parse(viz_grouping);
  if (viz_cell < 1) throw ValidationError("viz.cell must be positive");
}

void RunConfig::validate_inputs() const {
  validate();
  if (interactions.empty()) throw ValidationError("data.interactions is required");
  if (!std::filesystem::exists(interactions))
    throw ValidationError("interactions file not found: " + interactions.string());
  if (social && !std::filesystem::exists(*social)) throw ValidationError("social file not found: " + social->string());
}

KeyValueConfig RunConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("data.interactions", interactions.string());
  if (social) kv.set("data.social", social->string());
  kv.set("data.format", format == TsvFormat::kExplicit ? "tsv-explicit" : "tsv-implicit");
  kv.set_int("data.rating_levels", rating_levels);
  kv.set_double("split.train", split.train_fraction);
  kv.set_double("split.val", split.val_fraction);
  kv.set_double("split.test", split.test_fraction);
  kv.set("split.seed", std::to_string(split.seed));
  kv.set_int("eval.negatives", static_cast<std::int64_t>(eval_negatives));
  kv.set_ints("eval.k", std::vector<std::int64_t>(eval_ks.begin(), eval_ks.end()));
  kv.set("eval.seed", std::to_string(eval_seed));
  kv.set_int("graph.beta", beta);
  kv.set_int("graph.cap_per_user", static_cast<std::int64_t>(cap_per_user));
  kv.set("graph.seed", std::to_string(pool_seed));
  kv.set_int("model.dim", model.dim);
  kv.set_int("model.rating_dim", model.rating_dim);
  kv.set_int("model.hidden", model.hidden);
  kv.set_int("model.blocks", model.blocks);
  kv.set_int("model.categories", model.categories);
  kv.set("model.social_agg", to_string(model.social_aggregation));
  kv.set("model.ablation", to_string(model.ablation));
  train.to_kv(kv);
  kv.set("run.out_dir", out_dir.string());
  std::vector<std::int64_t> s(seeds.begin(), seeds.end());
  kv.set_ints("run.seeds", s);
  kv.set("viz.grouping", viz_grouping);
  kv.set("viz.split", viz_split);
  if (viz_labels) kv.set("viz.labels", viz_labels->string());
  kv.set_int("viz.cell", viz_cell);
  if (scm_spec) kv.set("scm.spec", scm_spec->string());
  return kv;
}

RunConfig RunConfig::from_kv(const KeyValueConfig& kv) {
  const auto unknown = kv.unknown_keys(known_keys());
  if (!unknown.empty()) throw ValidationError("unknown config key '" + unknown.front() + "'");
  RunConfig c;
  c.interactions = kv.get_string("data.interactions", "");
  if (auto s = kv.get("data.social"); s && !s->empty()) c.social = *s;
  c.format = tsv_format_from_string(kv.get_string("data.format", "tsv-explicit"));
  c.rating_levels = static_cast<int>(kv.get_int("data.rating_levels", c.rating_levels));
  c.split.train_fraction = kv.get_double("split.train", c.split.train_fraction);
  c.split.val_fraction = kv.get_double("split.val", c.split.val_fraction);
  c.split.test_fraction = kv.get_double("split.test", c.split.test_fraction);
  c.split.seed = static_cast<std::uint64_t>(kv.get_int("split.seed", static_cast<std::int64_t>(c.split.seed)));
  c.eval_negatives = non_negative(kv, "eval.negatives", c.eval_negatives);
  const auto ks = kv.get_ints("eval.k", {5, 10, 20});
  c.eval_ks.assign(ks.begin(), ks.end());
  c.eval_seed = static_cast<std::uint64_t>(kv.get_int("eval.seed", static_cast<std::int64_t>(c.eval_seed)));
  c.beta = static_cast<int>(kv.get_int("graph.beta", c.beta));
  c.cap_per_user = non_negative(kv, "graph.cap_per_user", c.cap_per_user);
  c.pool_seed = static_cast<std::uint64_t>(kv.get_int("graph.seed", static_cast<std::int64_t>(c.pool_seed)));
  c.model.dim = static_cast<int>(kv.get_int("model.dim", c.model.dim));
  c.model.rating_dim = static_cast<int>(kv.get_int("model.rating_dim", c.model.rating_dim));
  c.model.hidden = static_cast<int>(kv.get_int("model.hidden", c.model.hidden));
  c.model.blocks = static_cast<int>(kv.get_int("model.blocks", c.model.blocks));
  c.model.categories = static_cast<int>(kv.get_int("model.categories", c.model.categories));
  c.model.social_aggregation = social_aggregation_from_string(kv.get_string("model.social_agg", "neighbor"));
  c.model.ablation = ablation_from_string(kv.get_string("model.ablation", "full"));
  c.train = TrainConfig::from_kv(kv);
  c.out_dir = kv.get_string("run.out_dir", c.out_dir.string());
  const auto seeds = kv.get_ints("run.seeds", {1, 2, 3, 4, 5});
  c.seeds.clear();
  for (auto s : seeds) c.seeds.push_back(static_cast<std::uint64_t>(s));
  c.viz_grouping = kv.get_string("viz.grouping", c.viz_grouping);
  c.viz_split = kv.get_string("viz.split", c.viz_split);
  if (auto s = kv.get("viz.labels"); s && !s->empty()) c.viz_labels = *s;
  c.viz_cell = static_cast<int>(kv.get_int("viz.cell", c.viz_cell));
  if (auto s = kv.get("scm.spec"); s && !s->empty()) c.scm_spec = *s;
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return from_kv(KeyValueConfig::load(path)); }

void RunConfig::save(const std::filesystem::path& path) const { to_kv().save(path); }

}  // namespace rest
