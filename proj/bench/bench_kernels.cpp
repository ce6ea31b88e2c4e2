// Serial reference kernels against their OpenMP twins, plus one batched
// forward/backward pass of a scoring model.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "godin/kernels.hpp"
#include "godin/perturb.hpp"
#include "godin/scorer.hpp"
#include "godin/trainer.hpp"

namespace {

using namespace godin;

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

using Kernel = void (*)(std::span<const double>, std::span<const double>, std::span<double>,
                        std::size_t, std::size_t, std::size_t);

// Square problem of side state.range(0).
void run_kernel(benchmark::State& state, Kernel kernel) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n * n, 1), b = filled(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    kernel(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

void BM_matmul_serial(benchmark::State& s) { run_kernel(s, kernels::serial::matmul); }
void BM_matmul_parallel(benchmark::State& s) { run_kernel(s, kernels::parallel::matmul); }
void BM_matmul_tn_serial(benchmark::State& s) { run_kernel(s, kernels::serial::matmul_tn); }
void BM_matmul_tn_parallel(benchmark::State& s) { run_kernel(s, kernels::parallel::matmul_tn); }
void BM_pairwise_serial(benchmark::State& s) { run_kernel(s, kernels::serial::pairwise_sq_dist); }
void BM_pairwise_parallel(benchmark::State& s) { run_kernel(s, kernels::parallel::pairwise_sq_dist); }

BENCHMARK(BM_matmul_serial)->RangeMultiplier(2)->Range(32, 512);
BENCHMARK(BM_matmul_parallel)->RangeMultiplier(2)->Range(32, 512)->UseRealTime();
BENCHMARK(BM_matmul_tn_serial)->RangeMultiplier(2)->Range(32, 512);
BENCHMARK(BM_matmul_tn_parallel)->RangeMultiplier(2)->Range(32, 512)->UseRealTime();
BENCHMARK(BM_pairwise_serial)->RangeMultiplier(2)->Range(32, 512);
BENCHMARK(BM_pairwise_parallel)->RangeMultiplier(2)->Range(32, 512)->UseRealTime();

// Perturbation step (score + input gradient) on a batch of 256.
void BM_perturb_batch(benchmark::State& state) {
  ModelSpec spec;
  spec.backbone.input_dim = 16;
  spec.backbone.hidden_dims = {64, 64};
  spec.backbone.use_batchnorm = {true, true};
  spec.head.num_classes = 8;
  spec.head.feature_dim = 64;
  const Model model = init_model(spec, 1);
  const Tensor x({256, 16}, filled(256 * 16, 3));
  const auto fn = ScoreFn(ScoreKind::DeConfH).bind(model);
  for (auto _ : state) benchmark::DoNotOptimize(perturb(x, fn, 0.01).values().data());
}
BENCHMARK(BM_perturb_batch)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
