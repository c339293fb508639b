#include <vector>

#include <benchmark/benchmark.h>

#include "predbio/kernels.hpp"
#include "predbio/rng.hpp"

namespace {

using namespace predbio;

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Shapes of the second block of the default network at batch 32.
kernels::ConvGeometry conv_geometry() { return {32, 8, 16, 14, 14, 3}; }

struct ConvData {
  kernels::ConvGeometry g = conv_geometry();
  std::vector<double> x = random_vector(g.batch * g.in_channels * g.height * g.width, 1);
  std::vector<double> w = random_vector(g.out_channels * g.in_channels * g.kernel * g.kernel, 2);
  std::vector<double> b = random_vector(g.out_channels, 3);
  std::vector<double> y = std::vector<double>(g.batch * g.out_channels * g.height * g.width);
  std::vector<double> dy = random_vector(y.size(), 4);
  std::vector<double> dx = std::vector<double>(x.size());
  std::vector<double> dw = std::vector<double>(w.size());
  std::vector<double> db = std::vector<double>(b.size());
};

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  ConvData d;
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::conv2d_forward(d.g, d.x, d.w, d.b, d.y);
    } else {
      kernels::reference::conv2d_forward(d.g, d.x, d.w, d.b, d.y);
    }
    benchmark::DoNotOptimize(d.y.data());
  }
}

template <bool Parallel>
void BM_ConvBackwardInput(benchmark::State& state) {
  ConvData d;
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::conv2d_backward_input(d.g, d.dy, d.w, d.dx);
    } else {
      kernels::reference::conv2d_backward_input(d.g, d.dy, d.w, d.dx);
    }
    benchmark::DoNotOptimize(d.dx.data());
  }
}

template <bool Parallel>
void BM_ConvBackwardParams(benchmark::State& state) {
  ConvData d;
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::conv2d_backward_params(d.g, d.x, d.dy, d.dw, d.db);
    } else {
      kernels::reference::conv2d_backward_params(d.g, d.x, d.dy, d.dw, d.db);
    }
    benchmark::DoNotOptimize(d.dw.data());
  }
}

template <bool Parallel>
void BM_Dense(benchmark::State& state) {
  const kernels::DenseGeometry g{32, 288, 32};
  const auto x = random_vector(g.batch * g.in, 5);
  const auto w = random_vector(g.out * g.in, 6);
  const auto b = random_vector(g.out, 7);
  std::vector<double> y(g.batch * g.out);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::dense_forward(g, x, w, b, y);
    } else {
      kernels::reference::dense_forward(g, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/openmp");
BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/reference");
BENCHMARK(BM_ConvBackwardInput<true>)->Name("conv_backward_input/openmp");
BENCHMARK(BM_ConvBackwardInput<false>)->Name("conv_backward_input/reference");
BENCHMARK(BM_ConvBackwardParams<true>)->Name("conv_backward_params/openmp");
BENCHMARK(BM_ConvBackwardParams<false>)->Name("conv_backward_params/reference");
BENCHMARK(BM_Dense<true>)->Name("dense_forward/openmp");
BENCHMARK(BM_Dense<false>)->Name("dense_forward/reference");

}  // namespace

BENCHMARK_MAIN();
