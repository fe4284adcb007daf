// Serial reference kernels against their OpenMP counterparts. Shapes follow
// the convolutions and attention products of the tiny and lite encoders.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ascore/encoder/encoder.hpp"
#include "ascore/numerics/kernels.hpp"
#include "ascore/numerics/ops.hpp"

namespace k = ascore::kernels;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

using Gemm = void (*)(std::size_t, std::size_t, std::size_t, std::span<const double>,
                      std::span<const double>, std::span<double>, bool);

template <Gemm fn>
void BM_gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto kk = static_cast<std::size_t>(state.range(2));
  const auto a = random_vector(m * kk, 1);
  const auto b = random_vector(kk * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    fn(m, n, kk, a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * static_cast<double>(m * n * kk),
                                                 benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}

// {M, N, K}: conv 3x3 64->64 on a 20x20 map, attention QK^T over 400 tokens,
// conv 3x3 128->128 on 60x80 (lite stage 3 at 480x640, one im2col tile).
#define GEMM_SHAPES Args({64, 400, 576})->Args({400, 400, 64})->Args({128, 128, 1152})

BENCHMARK_TEMPLATE(BM_gemm, k::serial::gemm_nn)->GEMM_SHAPES;
BENCHMARK_TEMPLATE(BM_gemm, k::parallel::gemm_nn)->GEMM_SHAPES;
BENCHMARK_TEMPLATE(BM_gemm, k::serial::gemm_tn)->GEMM_SHAPES;
BENCHMARK_TEMPLATE(BM_gemm, k::parallel::gemm_tn)->GEMM_SHAPES;
BENCHMARK_TEMPLATE(BM_gemm, k::serial::gemm_nt)->GEMM_SHAPES;
BENCHMARK_TEMPLATE(BM_gemm, k::parallel::gemm_nt)->GEMM_SHAPES;

k::ConvGeometry conv_geometry(benchmark::State& state) {
  k::ConvGeometry g;
  g.in_channels = static_cast<std::size_t>(state.range(0));
  g.height = static_cast<std::size_t>(state.range(1));
  g.width = static_cast<std::size_t>(state.range(1));
  g.kernel_h = g.kernel_w = 3;
  g.padding = 1;
  return g;
}

template <bool Parallel>
void BM_im2col(benchmark::State& state) {
  const k::ConvGeometry g = conv_geometry(state);
  const auto input = random_vector(g.in_channels * g.height * g.width, 3);
  std::vector<double> col(g.patch_size() * g.out_height() * g.out_width());
  for (auto _ : state) {
    if constexpr (Parallel)
      k::parallel::im2col(g, input, 0, g.out_height(), col);
    else
      k::serial::im2col(g, input, 0, g.out_height(), col);
    benchmark::DoNotOptimize(col.data());
  }
}

template <bool Parallel>
void BM_col2im(benchmark::State& state) {
  const k::ConvGeometry g = conv_geometry(state);
  const auto col = random_vector(g.patch_size() * g.out_height() * g.out_width(), 4);
  std::vector<double> grad(g.in_channels * g.height * g.width);
  for (auto _ : state) {
    if constexpr (Parallel)
      k::parallel::col2im(g, col, 0, g.out_height(), grad);
    else
      k::serial::col2im(g, col, 0, g.out_height(), grad);
    benchmark::DoNotOptimize(grad.data());
  }
}

template <bool Parallel>
void BM_maxpool(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  const auto input = random_vector(c * hw * hw, 5);
  std::vector<double> out(c * (hw / 2) * (hw / 2));
  std::vector<std::size_t> arg(out.size());
  for (auto _ : state) {
    if constexpr (Parallel)
      k::parallel::maxpool2x2(c, hw, hw, input, out, arg);
    else
      k::serial::maxpool2x2(c, hw, hw, input, out, arg);
    benchmark::DoNotOptimize(out.data());
  }
}

BENCHMARK_TEMPLATE(BM_im2col, false)->Args({16, 80})->Args({64, 40});
BENCHMARK_TEMPLATE(BM_im2col, true)->Args({16, 80})->Args({64, 40});
BENCHMARK_TEMPLATE(BM_col2im, false)->Args({16, 80})->Args({64, 40});
BENCHMARK_TEMPLATE(BM_col2im, true)->Args({16, 80})->Args({64, 40});
BENCHMARK_TEMPLATE(BM_maxpool, false)->Args({8, 160})->Args({64, 80});
BENCHMARK_TEMPLATE(BM_maxpool, true)->Args({8, 160})->Args({64, 80});

// Whole tiny encoder on a 160x160 frame: forward, then forward plus backward.
void BM_tiny_encoder(benchmark::State& state) {
  std::mt19937_64 rng(0);
  const ascore::encoder::Encoder enc(ascore::encoder::EncoderConfig::tiny(), rng);
  const auto image =
      ascore::numerics::Tensor::from_data({3, 160, 160}, random_vector(3 * 160 * 160, 6));
  const bool backward = state.range(0) != 0;
  for (auto _ : state) {
    if (backward) {
      ascore::numerics::sum(enc(image).data).backward();
    } else {
      ascore::numerics::NoGradGuard ng;
      benchmark::DoNotOptimize(enc(image).data.data().data());
    }
  }
}
BENCHMARK(BM_tiny_encoder)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
