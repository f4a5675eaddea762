// Microbenchmarks for the hot paths: exact and entropic transport, cost
// matrices, and the network forward pass.

#include <benchmark/benchmark.h>

#include "sleepalign/nn/mrcnn.hpp"
#include "sleepalign/ot/cost_matrix.hpp"
#include "sleepalign/ot/emd.hpp"
#include "sleepalign/rng.hpp"
#include "sleepalign/synth/synth.hpp"

using namespace sleepalign;

namespace {

nn::FeatureSet random_features(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  nn::FeatureSet f;
  f.rows = rows;
  f.dim = dim;
  f.values.resize(rows * dim);
  for (auto& v : f.values) v = rng.normal();
  return f;
}

void BM_EmdExact(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto cost = ot::cost_matrix(random_features(m, 128, 1), random_features(n, 128, 2));
  const auto ws = ot::uniform_weights(m);
  const auto wt = ot::uniform_weights(n);
  for (auto _ : state) benchmark::DoNotOptimize(ot::emd_exact(cost, ws, wt).value);
}
BENCHMARK(BM_EmdExact)->Args({16, 64})->Args({64, 256})->Args({64, 512})->Unit(benchmark::kMillisecond);

void BM_Sinkhorn(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto cost = ot::cost_matrix(random_features(m, 128, 3), random_features(n, 128, 4));
  const auto ws = ot::uniform_weights(m);
  const auto wt = ot::uniform_weights(n);
  ot::SinkhornOptions opt;
  opt.epsilon = 0.05 * cost.mean();
  for (auto _ : state) benchmark::DoNotOptimize(ot::emd_sinkhorn(cost, ws, wt, opt).value);
}
BENCHMARK(BM_Sinkhorn)->Args({64, 512})->Args({256, 1024})->Unit(benchmark::kMillisecond);

void BM_CostMatrix(benchmark::State& state) {
  const auto a = random_features(64, 128, 5);
  const auto b = random_features(static_cast<std::size_t>(state.range(0)), 128, 6);
  for (auto _ : state) benchmark::DoNotOptimize(ot::cost_matrix(a, b).values.data());
}
BENCHMARK(BM_CostMatrix)->Arg(512)->Arg(2048);

void BM_Forward(benchmark::State& state) {
  const auto model = nn::ModelParams::initialize(nn::MrcnnConfig::standard(), 7);
  synth::DomainRequest req;
  req.n_per_class = static_cast<int>(state.range(0)) / 5;
  req.seed = 8;
  const auto ds = synth::gen_domain(req);
  for (auto _ : state) benchmark::DoNotOptimize(nn::extract_features(model, ds).values.data());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * static_cast<std::int64_t>(ds.size()));
}
BENCHMARK(BM_Forward)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
