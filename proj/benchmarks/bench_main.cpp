#include <benchmark/benchmark.h>

#include <vector>

#include "rest/graph_store.hpp"
#include "rest/metrics.hpp"
#include "rest/model.hpp"
#include "rest/scm.hpp"
#include "rest/training.hpp"

namespace {

using namespace rest;

// Shared synthetic log; built once.
const Dataset& bench_dataset() {
  static const Dataset ds = generate(regime_scm_spec()).dataset;
  return ds;
}

ModelConfig bench_config(const Dataset& ds) {
  ModelConfig c;
  c.num_users = ds.num_users;
  c.num_items = ds.num_items;
  c.rating_levels = ds.rating_levels;
  c.dim = 16;
  c.rating_dim = 8;
  c.hidden = 32;
  c.blocks = 4;
  c.categories = 4;
  return c;
}

void BM_LossForward(benchmark::State& state) {
  const auto& ds = bench_dataset();
  const GraphStore graph(ds);
  PoolOptions popt;
  popt.cap_per_user = 50;
  const auto pool = build_counterfactual_pool(graph, popt);
  TrainConfig cfg;
  cfg.batch_size = static_cast<std::size_t>(state.range(0));
  BatchAssembler assembler(graph, ds, pool, cfg);
  const Batch batch = assembler.next(0);
  RestModel model(bench_config(ds), 1, 3.0);
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(model.loss_terms(batch, 0.5, 0.0, rng).total());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossForward)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_LossForwardBackward(benchmark::State& state) {
  const auto& ds = bench_dataset();
  const GraphStore graph(ds);
  PoolOptions popt;
  popt.cap_per_user = 50;
  const auto pool = build_counterfactual_pool(graph, popt);
  TrainConfig cfg;
  cfg.batch_size = static_cast<std::size_t>(state.range(0));
  BatchAssembler assembler(graph, ds, pool, cfg);
  const Batch batch = assembler.next(0);
  RestModel model(bench_config(ds), 1, 3.0);
  auto grad = ModelParameters::zeros(model.config());
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(model.loss_terms(batch, 0.5, 0.01, rng, &grad).total());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossForwardBackward)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_CounterfactualPool(benchmark::State& state) {
  const GraphStore graph(bench_dataset());
  PoolOptions popt;
  popt.beta = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_counterfactual_pool(graph, popt).size());
}
BENCHMARK(BM_CounterfactualPool)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_RankingMetrics(benchmark::State& state) {
  std::vector<ItemId> ranked(101);
  for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i] = static_cast<ItemId>(i);
  for (auto _ : state) {
    for (ItemId target = 0; target < 101; ++target) {
      benchmark::DoNotOptimize(hr_at_k(ranked, target, 10));
      benchmark::DoNotOptimize(ndcg_at_k(ranked, target, 10));
    }
  }
}
BENCHMARK(BM_RankingMetrics);

void BM_ExactInterventional(benchmark::State& state) {
  Rng rng(7);
  const auto spec = random_scm_spec(rng, 3, 6, 6, 4, 5);
  for (auto _ : state) benchmark::DoNotOptimize(exact_interventional(spec, 1, 2).max_abs_difference());
}
BENCHMARK(BM_ExactInterventional);

}  // namespace

BENCHMARK_MAIN();
