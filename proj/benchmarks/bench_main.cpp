#include <benchmark/benchmark.h>

#include <map>

#include "geoprior/fur.hpp"
#include "geoprior/geometry.hpp"
#include "geoprior/linalg.hpp"
#include "geoprior/model.hpp"
#include "geoprior/pipeline.hpp"
#include "geoprior/randvec.hpp"
#include "geoprior/rng.hpp"

using namespace geoprior;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

void BM_SymEigen(benchmark::State& state) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const Matrix x = gaussian(4 * p, p, 1);
  const SymMatrix s = covariance_of_rows(x);
  for (auto _ : state) benchmark::DoNotOptimize(sym_eigen(s));
}
BENCHMARK(BM_SymEigen)->Arg(16)->Arg(32)->Arg(64)->Arg(128);

void BM_Covariance(benchmark::State& state) {
  const Matrix x = gaussian(static_cast<std::size_t>(state.range(0)), 32, 2);
  for (auto _ : state) benchmark::DoNotOptimize(covariance_of_rows(x, true));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Covariance)->Arg(100)->Arg(1000)->Arg(10000);

void BM_ComposeBalancedBatch(benchmark::State& state) {
  const Benchmark b = make_benchmark(standard_synth_config(0), 1);
  const HeadTailSplit split = split_head_tail(b.train.data.class_counts(), {});
  std::map<int, GeometryBasis> geoms;
  for (int h : split.head) geoms.emplace(h, geometry_of(b.train.data, h, true));
  std::map<int, int> match;
  for (int t : split.tail) match[t] = split.head.front();
  FurConfig cfg;
  cfg.n_t = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  for (auto _ : state)
    benchmark::DoNotOptimize(compose_balanced_batch(b.train.data, split.tail, split.head, match, geoms, cfg, rng));
}
BENCHMARK(BM_ComposeBalancedBatch)->Arg(16)->Arg(64);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig cfg;
  cfg.input_dim = 16;
  cfg.num_classes = 10;
  Model m(cfg);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix x = gaussian(n, cfg.input_dim, 4);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % cfg.num_classes);
  for (auto _ : state) benchmark::DoNotOptimize(m.train_step(x, y, 1e-3));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(128);

void BM_InnerProductHistogram(benchmark::State& state) {
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(mc_validate_pdf(64, static_cast<std::size_t>(state.range(0)), 50, rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_InnerProductHistogram)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
