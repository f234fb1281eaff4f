// Parallel vs serial kernels, plus one full training step.
//
//   ./build/bench/bench_kernels --benchmark_filter=conv

#include <benchmark/benchmark.h>

#include <vector>

#include "sgsr/backbone.hpp"
#include "sgsr/kernels.hpp"
#include "sgsr/random.hpp"

using namespace sgsr;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

template <bool Parallel>
void BM_Conv3x3(benchmark::State& state) {
  const std::size_t c = std::size_t(state.range(0)), hw = std::size_t(state.range(1));
  const kernels::ConvDims d{c, c, hw, hw};
  const auto x = random_vector(c * hw * hw, 1), w = random_vector(c * c * 9, 2), b = random_vector(c, 3);
  std::vector<double> y(c * hw * hw);
  for (auto _ : state) {
    if constexpr (Parallel) kernels::conv3x3(d, x, w, b, y);
    else kernels::conv3x3_serial(d, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(c * c * 9 * hw * hw));
}

template <bool Parallel>
void BM_Conv3x3GradInput(benchmark::State& state) {
  const std::size_t c = std::size_t(state.range(0)), hw = std::size_t(state.range(1));
  const kernels::ConvDims d{c, c, hw, hw};
  const auto gy = random_vector(c * hw * hw, 1), w = random_vector(c * c * 9, 2);
  std::vector<double> gx(c * hw * hw);
  for (auto _ : state) {
    if constexpr (Parallel) kernels::conv3x3_grad_input(d, gy, w, gx);
    else kernels::conv3x3_grad_input_serial(d, gy, w, gx);
    benchmark::DoNotOptimize(gx.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(c * c * 9 * hw * hw));
}

template <bool Parallel>
void BM_Conv3x3GradParams(benchmark::State& state) {
  const std::size_t c = std::size_t(state.range(0)), hw = std::size_t(state.range(1));
  const kernels::ConvDims d{c, c, hw, hw};
  const auto gy = random_vector(c * hw * hw, 1), x = random_vector(c * hw * hw, 2);
  std::vector<double> gw(c * c * 9), gb(c);
  for (auto _ : state) {
    if constexpr (Parallel) kernels::conv3x3_grad_params(d, gy, x, gw, gb);
    else kernels::conv3x3_grad_params_serial(d, gy, x, gw, gb);
    benchmark::DoNotOptimize(gw.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(c * c * 9 * hw * hw));
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const std::size_t n = std::size_t(state.range(0));
  const auto a = random_vector(n * n, 1), b = random_vector(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) kernels::matmul(n, n, n, a, b, c);
    else kernels::matmul_serial(n, n, n, a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(n * n * n));
}

void BM_TrainStep(benchmark::State& state) {
  BackboneConfig c;
  c.height = c.width = std::size_t(state.range(0));
  c.base_channels = std::size_t(state.range(1));
  Model m(c);
  Adam adam(m.params().tensors());
  const auto samples = make_samples({make_phantom_pair(1, c.height, c.width, PhantomStyle::Knee)}, 2);
  const std::vector<const Sample*> batch{&samples[0]};
  for (auto _ : state) benchmark::DoNotOptimize(train_step(m, adam, batch, 1e-4));
}

}  // namespace

BENCHMARK(BM_Conv3x3<true>)->Args({32, 64})->Args({64, 32})->Args({128, 16});
BENCHMARK(BM_Conv3x3<false>)->Args({32, 64})->Args({64, 32})->Args({128, 16});
BENCHMARK(BM_Conv3x3GradInput<true>)->Args({32, 64});
BENCHMARK(BM_Conv3x3GradInput<false>)->Args({32, 64});
BENCHMARK(BM_Conv3x3GradParams<true>)->Args({32, 64});
BENCHMARK(BM_Conv3x3GradParams<false>)->Args({32, 64});
BENCHMARK(BM_Matmul<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_TrainStep)->Args({32, 8})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
