#include "ascore/numerics/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

#include <omp.h>

namespace ascore::kernels {

namespace {

using Index = std::ptrdiff_t;

void prepare_output(std::span<double> c, bool accumulate) {
  if (!accumulate) std::fill(c.begin(), c.end(), 0.0);
}

}  // namespace

namespace serial {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  prepare_output(c, accumulate);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  prepare_output(c, accumulate);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = acc;
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  prepare_output(c, accumulate);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = c[i * n + j];
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = acc;
    }
}

void im2col(const ConvGeometry& g, std::span<const double> input, std::size_t row_begin,
            std::size_t row_end, std::span<double> col) {
  const std::size_t ow = g.out_width();
  const std::size_t cols = (row_end - row_begin) * ow;
  for (std::size_t r = 0; r < g.patch_size(); ++r) {
    const std::size_t ch = r / (g.kernel_h * g.kernel_w);
    const std::size_t ki = (r / g.kernel_w) % g.kernel_h;
    const std::size_t kj = r % g.kernel_w;
    for (std::size_t y = row_begin; y < row_end; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const Index iy = static_cast<Index>(y * g.stride + ki) - static_cast<Index>(g.padding);
        const Index ix = static_cast<Index>(x * g.stride + kj) - static_cast<Index>(g.padding);
        double v = 0.0;
        if (iy >= 0 && ix >= 0 && iy < static_cast<Index>(g.height) &&
            ix < static_cast<Index>(g.width))
          v = input[(ch * g.height + static_cast<std::size_t>(iy)) * g.width +
                    static_cast<std::size_t>(ix)];
        col[r * cols + (y - row_begin) * ow + x] = v;
      }
  }
}

void col2im(const ConvGeometry& g, std::span<const double> col, std::size_t row_begin,
            std::size_t row_end, std::span<double> input_grad) {
  const std::size_t ow = g.out_width();
  const std::size_t cols = (row_end - row_begin) * ow;
  for (std::size_t r = 0; r < g.patch_size(); ++r) {
    const std::size_t ch = r / (g.kernel_h * g.kernel_w);
    const std::size_t ki = (r / g.kernel_w) % g.kernel_h;
    const std::size_t kj = r % g.kernel_w;
    for (std::size_t y = row_begin; y < row_end; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const Index iy = static_cast<Index>(y * g.stride + ki) - static_cast<Index>(g.padding);
        const Index ix = static_cast<Index>(x * g.stride + kj) - static_cast<Index>(g.padding);
        if (iy >= 0 && ix >= 0 && iy < static_cast<Index>(g.height) &&
            ix < static_cast<Index>(g.width))
          input_grad[(ch * g.height + static_cast<std::size_t>(iy)) * g.width +
                     static_cast<std::size_t>(ix)] += col[r * cols + (y - row_begin) * ow + x];
      }
  }
}

void maxpool2x2(std::size_t channels, std::size_t height, std::size_t width,
                std::span<const double> input, std::span<double> output,
                std::span<std::size_t> argmax) {
  const std::size_t oh = height / 2, ow = width / 2;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (c * height + 2 * y) * width + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (c * height + 2 * y + dy) * width + 2 * x + dx;
            if (input[idx] > input[best]) best = idx;
          }
        output[(c * oh + y) * ow + x] = input[best];
        argmax[(c * oh + y) * ow + x] = best;
      }
}

}  // namespace serial

namespace parallel {

namespace {

// Register-blocked micro kernel: an MR x (8*NV) tile of C is accumulated in
// vector registers over the full k loop, then added to C once. Every element
// of C sees the same summation order regardless of how tiles are scheduled.
typedef double v8d __attribute__((vector_size(64)));

inline v8d load8(const double* p) {
  v8d v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void add_store8(double* p, v8d v) {
  v += load8(p);
  std::memcpy(p, &v, sizeof v);
}

template <int MR, int NV, typename AAt>
inline void tile(std::size_t i0, std::size_t j0, std::size_t n, std::size_t k, AAt a_at,
                 const double* __restrict b, double* __restrict c) {
  v8d acc[MR][NV];
  for (int r = 0; r < MR; ++r)
    for (int v = 0; v < NV; ++v) acc[r][v] = v8d{};
  for (std::size_t p = 0; p < k; ++p) {
    const double* bp = b + p * n + j0;
    v8d bv[NV];
    for (int v = 0; v < NV; ++v) bv[v] = load8(bp + 8 * v);
    for (int r = 0; r < MR; ++r) {
      const double a = a_at(i0 + static_cast<std::size_t>(r), p);
      for (int v = 0; v < NV; ++v) acc[r][v] += a * bv[v];
    }
  }
  for (int r = 0; r < MR; ++r)
    for (int v = 0; v < NV; ++v) add_store8(c + (i0 + static_cast<std::size_t>(r)) * n + j0 + 8 * v, acc[r][v]);
}

// Columns [j0, j1) with j1 - j0 < 8, scalar.
template <typename AAt>
inline void tail_columns(std::size_t i0, std::size_t rows, std::size_t j0, std::size_t j1,
                         std::size_t n, std::size_t k, AAt a_at, const double* __restrict b,
                         double* __restrict c) {
  for (std::size_t i = i0; i < i0 + rows; ++i) {
    double acc[8] = {};
    for (std::size_t p = 0; p < k; ++p) {
      const double a = a_at(i, p);
      const double* bp = b + p * n;
      for (std::size_t j = j0; j < j1; ++j) acc[j - j0] += a * bp[j];
    }
    for (std::size_t j = j0; j < j1; ++j) c[i * n + j] += acc[j - j0];
  }
}

template <int MR, typename AAt>
inline void row_block(std::size_t i0, std::size_t j0, std::size_t j1, std::size_t n,
                      std::size_t k, AAt a_at, const double* b, double* c) {
  std::size_t j = j0;
  for (; j + 16 <= j1; j += 16) tile<MR, 2>(i0, j, n, k, a_at, b, c);
  for (; j + 8 <= j1; j += 8) tile<MR, 1>(i0, j, n, k, a_at, b, c);
  if (j < j1) tail_columns(i0, MR, j, j1, n, k, a_at, b, c);
}

template <typename AAt>
inline void dispatch_rows(std::size_t i0, std::size_t rows, std::size_t j0, std::size_t j1,
                          std::size_t n, std::size_t k, AAt a_at, const double* b, double* c) {
  switch (rows) {
    case 6: row_block<6>(i0, j0, j1, n, k, a_at, b, c); break;
    case 5: row_block<5>(i0, j0, j1, n, k, a_at, b, c); break;
    case 4: row_block<4>(i0, j0, j1, n, k, a_at, b, c); break;
    case 3: row_block<3>(i0, j0, j1, n, k, a_at, b, c); break;
    case 2: row_block<2>(i0, j0, j1, n, k, a_at, b, c); break;
    default: row_block<1>(i0, j0, j1, n, k, a_at, b, c); break;
  }
}

constexpr std::size_t kRowBlock = 6;
constexpr std::size_t kColumnBlock = 256;

template <typename AAt>
void gemm_rows(std::size_t m, std::size_t n, std::size_t k, AAt a_at, const double* b, double* c) {
  const Index row_blocks = static_cast<Index>((m + kRowBlock - 1) / kRowBlock);
  const Index col_blocks = static_cast<Index>((n + kColumnBlock - 1) / kColumnBlock);
  const Index tasks = row_blocks * col_blocks;
#pragma omp parallel for schedule(static) if (tasks > 1 && m * n * k > 32768)
  for (Index t = 0; t < tasks; ++t) {
    // Column-block major so consecutive tasks reuse the same B panel.
    const std::size_t cb = static_cast<std::size_t>(t / row_blocks);
    const std::size_t rb = static_cast<std::size_t>(t % row_blocks);
    const std::size_t i0 = rb * kRowBlock;
    const std::size_t rows = std::min(kRowBlock, m - i0);
    const std::size_t j0 = cb * kColumnBlock;
    const std::size_t j1 = std::min(n, j0 + kColumnBlock);
    dispatch_rows(i0, rows, j0, j1, n, k, a_at, b, c);
  }
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  prepare_output(c, accumulate);
  const double* ap = a.data();
  gemm_rows(m, n, k, [ap, k](std::size_t i, std::size_t p) { return ap[i * k + p]; }, b.data(),
            c.data());
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  prepare_output(c, accumulate);
  const double* ap = a.data();
  gemm_rows(m, n, k, [ap, m](std::size_t i, std::size_t p) { return ap[p * m + i]; }, b.data(),
            c.data());
}

namespace {

inline double hsum(v8d v) {
  return ((v[0] + v[4]) + (v[1] + v[5])) + ((v[2] + v[6]) + (v[3] + v[7]));
}

// C[i][j] += sum_p A[i,p] B[j,p] for an MR x NR tile; both operands are
// contiguous along p, accumulated in 8-wide lanes then reduced.
template <int MR, int NR>
inline void dot_tile(std::size_t i0, std::size_t j0, std::size_t n, std::size_t k,
                     const double* __restrict a, const double* __restrict b,
                     double* __restrict c) {
  v8d acc[MR][NR];
  for (int r = 0; r < MR; ++r)
    for (int q = 0; q < NR; ++q) acc[r][q] = v8d{};
  const std::size_t k8 = k - k % 8;
  for (std::size_t p = 0; p < k8; p += 8) {
    v8d bv[NR];
    for (int q = 0; q < NR; ++q) bv[q] = load8(b + (j0 + static_cast<std::size_t>(q)) * k + p);
    for (int r = 0; r < MR; ++r) {
      const v8d av = load8(a + (i0 + static_cast<std::size_t>(r)) * k + p);
      for (int q = 0; q < NR; ++q) acc[r][q] += av * bv[q];
    }
  }
  for (int r = 0; r < MR; ++r)
    for (int q = 0; q < NR; ++q) {
      const double* ar = a + (i0 + static_cast<std::size_t>(r)) * k;
      const double* br = b + (j0 + static_cast<std::size_t>(q)) * k;
      double tail = 0.0;
      for (std::size_t p = k8; p < k; ++p) tail += ar[p] * br[p];
      c[(i0 + static_cast<std::size_t>(r)) * n + j0 + static_cast<std::size_t>(q)] +=
          hsum(acc[r][q]) + tail;
    }
}

template <int MR>
inline void dot_rows(std::size_t i0, std::size_t n, std::size_t k, const double* a,
                     const double* b, double* c) {
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) dot_tile<MR, 4>(i0, j, n, k, a, b, c);
  for (; j < n; ++j) dot_tile<MR, 1>(i0, j, n, k, a, b, c);
}

}  // namespace

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  prepare_output(c, accumulate);
  const Index row_blocks = static_cast<Index>((m + 3) / 4);
#pragma omp parallel for schedule(static) if (row_blocks > 1 && m * n * k > 32768)
  for (Index t = 0; t < row_blocks; ++t) {
    const std::size_t i0 = static_cast<std::size_t>(t) * 4;
    switch (std::min<std::size_t>(4, m - i0)) {
      case 4: dot_rows<4>(i0, n, k, a.data(), b.data(), c.data()); break;
      case 3: dot_rows<3>(i0, n, k, a.data(), b.data(), c.data()); break;
      case 2: dot_rows<2>(i0, n, k, a.data(), b.data(), c.data()); break;
      default: dot_rows<1>(i0, n, k, a.data(), b.data(), c.data()); break;
    }
  }
}

void im2col(const ConvGeometry& g, std::span<const double> input, std::size_t row_begin,
            std::size_t row_end, std::span<double> col) {
  const std::size_t ow = g.out_width();
  const std::size_t cols = (row_end - row_begin) * ow;
  const Index patch = static_cast<Index>(g.patch_size());
#pragma omp parallel for schedule(static)
  for (Index ri = 0; ri < patch; ++ri) {
    const std::size_t r = static_cast<std::size_t>(ri);
    const std::size_t ch = r / (g.kernel_h * g.kernel_w);
    const std::size_t ki = (r / g.kernel_w) % g.kernel_h;
    const std::size_t kj = r % g.kernel_w;
    double* out = col.data() + r * cols;
    for (std::size_t y = row_begin; y < row_end; ++y) {
      const Index iy = static_cast<Index>(y * g.stride + ki) - static_cast<Index>(g.padding);
      double* row = out + (y - row_begin) * ow;
      if (iy < 0 || iy >= static_cast<Index>(g.height)) {
        std::fill(row, row + ow, 0.0);
        continue;
      }
      const double* src = input.data() + (ch * g.height + static_cast<std::size_t>(iy)) * g.width;
      for (std::size_t x = 0; x < ow; ++x) {
        const Index ix = static_cast<Index>(x * g.stride + kj) - static_cast<Index>(g.padding);
        row[x] = (ix >= 0 && ix < static_cast<Index>(g.width)) ? src[ix] : 0.0;
      }
    }
  }
}

void col2im(const ConvGeometry& g, std::span<const double> col, std::size_t row_begin,
            std::size_t row_end, std::span<double> input_grad) {
  const std::size_t ow = g.out_width();
  const std::size_t cols = (row_end - row_begin) * ow;
  const std::size_t per_channel = g.kernel_h * g.kernel_w;
  const Index channels = static_cast<Index>(g.in_channels);
  // One thread per input channel: each owns a disjoint slice of input_grad.
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < channels; ++ci) {
    const std::size_t ch = static_cast<std::size_t>(ci);
    for (std::size_t q = 0; q < per_channel; ++q) {
      const std::size_t r = ch * per_channel + q;
      const std::size_t ki = q / g.kernel_w;
      const std::size_t kj = q % g.kernel_w;
      const double* src = col.data() + r * cols;
      for (std::size_t y = row_begin; y < row_end; ++y) {
        const Index iy = static_cast<Index>(y * g.stride + ki) - static_cast<Index>(g.padding);
        if (iy < 0 || iy >= static_cast<Index>(g.height)) continue;
        double* dst = input_grad.data() + (ch * g.height + static_cast<std::size_t>(iy)) * g.width;
        const double* row = src + (y - row_begin) * ow;
        for (std::size_t x = 0; x < ow; ++x) {
          const Index ix = static_cast<Index>(x * g.stride + kj) - static_cast<Index>(g.padding);
          if (ix >= 0 && ix < static_cast<Index>(g.width)) dst[ix] += row[x];
        }
      }
    }
  }
}

void maxpool2x2(std::size_t channels, std::size_t height, std::size_t width,
                std::span<const double> input, std::span<double> output,
                std::span<std::size_t> argmax) {
  const std::size_t oh = height / 2, ow = width / 2;
  const Index n = static_cast<Index>(channels);
#pragma omp parallel for schedule(static)
  for (Index ci = 0; ci < n; ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t base = (c * height + 2 * y) * width + 2 * x;
        std::size_t best = base;
        if (input[base + 1] > input[best]) best = base + 1;
        if (input[base + width] > input[best]) best = base + width;
        if (input[base + width + 1] > input[best]) best = base + width + 1;
        output[(c * oh + y) * ow + x] = input[best];
        argmax[(c * oh + y) * ow + x] = best;
      }
  }
}

}  // namespace parallel

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) { omp_set_num_threads(n); }

}  // namespace ascore::kernels
