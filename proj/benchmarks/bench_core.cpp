#include <benchmark/benchmark.h>

#include <random>

#include "xmodal/index.hpp"
#include "xmodal/losses.hpp"
#include "xmodal/numerics.hpp"
#include "xmodal/synthetic.hpp"
#include "xmodal/trainer.hpp"

using namespace xmodal;

namespace {

Matrix random_rows(std::size_t n, std::size_t d, std::uint64_t seed, bool unit) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(n, d);
  for (double& x : m.data()) x = g(rng);
  return unit ? l2_normalize_rows(m) : m;
}

void BM_IndexSearch(benchmark::State& state) {
  SynthSpec s;
  s.n = static_cast<std::size_t>(state.range(0));
  s.dim = 512;
  const FusedIndex idx = build_index(make_synthetic(s));
  const Vector query = idx.entries()[0].vector;
  for (auto _ : state) benchmark::DoNotOptimize(idx.search(query, 10));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IndexSearch)->Arg(1000)->Arg(4000);

void BM_CosineMatrix(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_rows(n, 512, 1, true), b = random_rows(n, 512, 2, true);
  for (auto _ : state) benchmark::DoNotOptimize(cosine_matrix(a, b));
}
BENCHMARK(BM_CosineMatrix)->Arg(32)->Arg(128);

void BM_ClipLoss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix v = random_rows(n, 512, 3, false), t = random_rows(n, 512, 4, false);
  for (auto _ : state) benchmark::DoNotOptimize(clip_loss(v, t, 0.07));
}
BENCHMARK(BM_ClipLoss)->Arg(32)->Arg(128);

void BM_SupConLoss(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix f = random_rows(n, 512, 5, true);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  for (auto _ : state) benchmark::DoNotOptimize(supcon_loss(f, labels, 0.07));
}
BENCHMARK(BM_SupConLoss)->Arg(32)->Arg(128);

void BM_TrainStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix v = random_rows(n, 512, 6, false), t = random_rows(n, 512, 7, false);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  const ModelParams p = init_params(512, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_batch(p, v, t, labels, LossWeights{}, 0.1, Mode::Train, 1, true));
  }
}
BENCHMARK(BM_TrainStep)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
