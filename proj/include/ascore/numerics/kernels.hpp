#pragma once

// Raw compute kernels behind the tensor ops. Every kernel exists twice:
// `serial::` is the straightforward reference used by the tests, and
// `parallel::` is the OpenMP version the ops dispatch to. Parallel kernels
// split work over independent output elements only, so results do not depend
// on the thread count.

#include <cstddef>
#include <span>

namespace ascore::kernels {

struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_height() const { return (height + 2 * padding - kernel_h) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * padding - kernel_w) / stride + 1; }
  std::size_t patch_size() const { return in_channels * kernel_h * kernel_w; }
};

namespace serial {

// C[M,N] (+)= A[M,K] * B[K,N]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
// C[M,N] (+)= A[K,M]^T * B[K,N]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
// C[M,N] (+)= A[M,K] * B[N,K]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);

// Unfolds output rows [row_begin, row_end) into col[patch_size, rows*out_w].
void im2col(const ConvGeometry& g, std::span<const double> input, std::size_t row_begin,
            std::size_t row_end, std::span<double> col);
// Adjoint of im2col: scatters col back into input-shaped grad (accumulating).
void col2im(const ConvGeometry& g, std::span<const double> col, std::size_t row_begin,
            std::size_t row_end, std::span<double> input_grad);

// 2x2 / stride 2 max pooling over [C,H,W]; argmax holds flat input indices.
void maxpool2x2(std::size_t channels, std::size_t height, std::size_t width,
                std::span<const double> input, std::span<double> output,
                std::span<std::size_t> argmax);

}  // namespace serial

namespace parallel {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void im2col(const ConvGeometry& g, std::span<const double> input, std::size_t row_begin,
            std::size_t row_end, std::span<double> col);
void col2im(const ConvGeometry& g, std::span<const double> col, std::size_t row_begin,
            std::size_t row_end, std::span<double> input_grad);
void maxpool2x2(std::size_t channels, std::size_t height, std::size_t width,
                std::span<const double> input, std::span<double> output,
                std::span<std::size_t> argmax);

}  // namespace parallel

// Number of OpenMP threads the parallel kernels will use.
int max_threads();
void set_threads(int n);

}  // namespace ascore::kernels
