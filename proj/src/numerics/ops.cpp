#include "ascore/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ascore/error.hpp"
#include "ascore/numerics/kernels.hpp"

namespace ascore::numerics {

namespace k = ascore::kernels::parallel;

namespace {

// Upper bound on the im2col scratch buffer, in doubles.
constexpr std::size_t kColBudget = std::size_t{1} << 14;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  if (a.rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(a.shape()));
}

void require_axis(const Tensor& a, std::size_t axis, const char* op) {
  if (axis >= a.rank())
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                     shape_string(a.shape()));
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      Node& in = parent(self, p);
      if (!in.requires_grad) continue;
      auto& g = in.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    const double sign[2] = {1.0, -1.0};
    for (std::size_t p = 0; p < 2; ++p) {
      Node& in = parent(self, p);
      if (!in.requires_grad) continue;
      auto& g = in.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[p] * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& x = parent(self, 0);
    Node& y = parent(self, 1);
    if (x.requires_grad) {
      auto& g = x.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * y.data[i];
    }
    if (y.requires_grad) {
      auto& g = y.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * x.data[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor add_constant(const Tensor& a, const Tensor& constant) {
  require_same_shape(a, constant, "add_constant");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + constant[i];
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return make_result({1}, {total}, {a}, [](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (double& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    Node& in = parent(self, 0);
    auto& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (in.data[i] > 0.0) g[i] += self.grad[i];
  });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  require_axis(a, axis, "softmax");
  const AxisSplit s = split_axis(a.shape(), axis);
  std::vector<double> out(a.numel());
  const auto in = a.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t q = 0; q < s.inner; ++q) {
      const std::size_t base = o * s.extent * s.inner + q;
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < s.extent; ++e) peak = std::max(peak, in[base + e * s.inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const double v = std::exp(in[base + e * s.inner] - peak);
        out[base + e * s.inner] = v;
        z += v;
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= z;
    }
  return make_result(a.shape(), std::move(out), {a}, [s](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    const auto& y = self.data;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t q = 0; q < s.inner; ++q) {
        const std::size_t base = o * s.extent * s.inner + q;
        double dot = 0.0;
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t i = base + e * s.inner;
          dot += self.grad[i] * y[i];
        }
        for (std::size_t e = 0; e < s.extent; ++e) {
          const std::size_t i = base + e * s.inner;
          g[i] += y[i] * (self.grad[i] - dot);
        }
      }
  });
}

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
  require_axis(a, axis, "concat");
  if (a.rank() != b.rank()) throw ShapeError("concat: rank mismatch");
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (i != axis && a.shape()[i] != b.shape()[i])
      throw ShapeError("concat: incompatible shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()));
  const AxisSplit sa = split_axis(a.shape(), axis);
  const AxisSplit sb = split_axis(b.shape(), axis);
  const std::size_t la = sa.extent * sa.inner, lb = sb.extent * sb.inner;
  Shape shape = a.shape();
  shape[axis] += b.shape()[axis];
  std::vector<double> out(a.numel() + b.numel());
  const auto da = a.data(), db = b.data();
  for (std::size_t o = 0; o < sa.outer; ++o) {
    std::copy_n(da.begin() + o * la, la, out.begin() + o * (la + lb));
    std::copy_n(db.begin() + o * lb, lb, out.begin() + o * (la + lb) + la);
  }
  return make_result(std::move(shape), std::move(out), {a, b},
                     [outer = sa.outer, la, lb](Node& self) {
                       Node& x = parent(self, 0);
                       Node& y = parent(self, 1);
                       for (std::size_t o = 0; o < outer; ++o) {
                         const double* src = self.grad.data() + o * (la + lb);
                         if (x.requires_grad) {
                           double* dst = x.grad_buffer().data() + o * la;
                           for (std::size_t i = 0; i < la; ++i) dst[i] += src[i];
                         }
                         if (y.requires_grad) {
                           double* dst = y.grad_buffer().data() + o * lb;
                           for (std::size_t i = 0; i < lb; ++i) dst[i] += src[la + i];
                         }
                       }
                     });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  require_axis(a, axis, "slice");
  if (length == 0 || start + length > a.shape()[axis])
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(start + length) + ") out of bounds for " +
                     shape_string(a.shape()));
  const AxisSplit s = split_axis(a.shape(), axis);
  Shape shape = a.shape();
  shape[axis] = length;
  const std::size_t run = length * s.inner;
  const std::size_t stride = s.extent * s.inner;
  const std::size_t offset = start * s.inner;
  std::vector<double> out(s.outer * run);
  const auto src = a.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(src.begin() + o * stride + offset, run, out.begin() + o * run);
  return make_result(std::move(shape), std::move(out), {a},
                     [outer = s.outer, run, stride, offset](Node& self) {
                       auto& g = parent(self, 0).grad_buffer();
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t i = 0; i < run; ++i)
                           g[o * stride + offset + i] += self.grad[o * run + i];
                     });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                     shape_string(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(a.numel());
  const auto src = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = src[i * c + j];
  return make_result({c, r}, std::move(out), {a}, [r, c](Node& self) {
    auto& g = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), kk = a.dim(1), n = b.dim(1);
  if (b.dim(0) != kk)
    throw ShapeError("matmul: inner dims differ " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  std::vector<double> out(m * n);
  k::gemm_nn(m, n, kk, a.data(), b.data(), out, false);
  return make_result({m, n}, std::move(out), {a, b}, [m, n, kk](Node& self) {
    Node& x = parent(self, 0);
    Node& y = parent(self, 1);
    if (x.requires_grad) k::gemm_nt(m, kk, n, self.grad, y.data, x.grad_buffer(), true);
    if (y.requires_grad) k::gemm_tn(kk, n, m, x.data, self.grad, y.grad_buffer(), true);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const std::size_t m = a.dim(0), kk = a.dim(1), n = b.dim(0);
  if (b.dim(1) != kk)
    throw ShapeError("matmul_nt: inner dims differ " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()) + "^T");
  std::vector<double> out(m * n);
  k::gemm_nt(m, n, kk, a.data(), b.data(), out, false);
  return make_result({m, n}, std::move(out), {a, b}, [m, n, kk](Node& self) {
    Node& x = parent(self, 0);
    Node& y = parent(self, 1);
    if (x.requires_grad) k::gemm_nn(m, kk, n, self.grad, y.data, x.grad_buffer(), true);
    if (y.requires_grad) k::gemm_tn(n, kk, m, self.grad, x.data, y.grad_buffer(), true);
  });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "linear");
  require_rank(weight, 2, "linear");
  require_rank(bias, 1, "linear");
  const std::size_t rows = input.dim(0), in = input.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in || bias.dim(0) != out_dim)
    throw ShapeError("linear: input " + shape_string(input.shape()) + " weight " +
                     shape_string(weight.shape()) + " bias " + shape_string(bias.shape()));
  std::vector<double> out(rows * out_dim);
  const auto b = bias.data();
  for (std::size_t r = 0; r < rows; ++r) std::copy(b.begin(), b.end(), out.begin() + r * out_dim);
  k::gemm_nt(rows, out_dim, in, input.data(), weight.data(), out, true);
  return make_result(
      {rows, out_dim}, std::move(out), {input, weight, bias}, [rows, in, out_dim](Node& self) {
        Node& x = parent(self, 0);
        Node& w = parent(self, 1);
        Node& bb = parent(self, 2);
        if (x.requires_grad) k::gemm_nn(rows, in, out_dim, self.grad, w.data, x.grad_buffer(), true);
        if (w.requires_grad) k::gemm_tn(out_dim, in, rows, self.grad, x.data, w.grad_buffer(), true);
        if (bb.requires_grad) {
          auto& g = bb.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t o = 0; o < out_dim; ++o) g[o] += self.grad[r * out_dim + o];
        }
      });
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank(input, 3, "conv2d");
  require_rank(weight, 4, "conv2d");
  require_rank(bias, 1, "conv2d");
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  const std::size_t c_out = weight.dim(0);
  kernels::ConvGeometry g;
  g.in_channels = input.dim(0);
  g.height = input.dim(1);
  g.width = input.dim(2);
  g.kernel_h = weight.dim(2);
  g.kernel_w = weight.dim(3);
  g.stride = stride;
  g.padding = padding;
  if (weight.dim(1) != g.in_channels)
    throw ShapeError("conv2d: weight expects " + std::to_string(weight.dim(1)) +
                     " input channels, input has " + std::to_string(g.in_channels));
  if (bias.dim(0) != c_out) throw ShapeError("conv2d: bias length must equal output channels");
  if (g.kernel_h % 2 == 0 || g.kernel_w % 2 == 0)
    throw ShapeError("conv2d: kernel dims must be odd");
  if (g.height + 2 * padding < g.kernel_h || g.width + 2 * padding < g.kernel_w)
    throw ShapeError("conv2d: kernel larger than padded input");

  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t patch = g.patch_size();
  const bool pointwise = g.kernel_h == 1 && g.kernel_w == 1 && stride == 1 && padding == 0;
  const std::size_t tile_rows =
      pointwise ? oh : std::clamp<std::size_t>(kColBudget / std::max<std::size_t>(1, patch * ow), 1, oh);

  std::vector<double> out(c_out * oh * ow);
  {
    std::vector<double> col, tmp;
    for (std::size_t r0 = 0; r0 < oh; r0 += tile_rows) {
      const std::size_t r1 = std::min(oh, r0 + tile_rows);
      const std::size_t cols = (r1 - r0) * ow;
      std::span<const double> col_view;
      if (pointwise) {
        col_view = input.data();
      } else {
        col.resize(patch * cols);
        k::im2col(g, input.data(), r0, r1, col);
        col_view = col;
      }
      if (r1 - r0 == oh) {
        k::gemm_nn(c_out, cols, patch, weight.data(), col_view, out, false);
      } else {
        tmp.resize(c_out * cols);
        k::gemm_nn(c_out, cols, patch, weight.data(), col_view, tmp, false);
        for (std::size_t c = 0; c < c_out; ++c)
          std::copy_n(tmp.begin() + c * cols, cols, out.begin() + c * oh * ow + r0 * ow);
      }
    }
    const auto b = bias.data();
    for (std::size_t c = 0; c < c_out; ++c)
      for (std::size_t i = 0; i < oh * ow; ++i) out[c * oh * ow + i] += b[c];
  }

  return make_result(
      {c_out, oh, ow}, std::move(out), {input, weight, bias},
      [g, c_out, oh, ow, patch, pointwise, tile_rows](Node& self) {
        Node& x = parent(self, 0);
        Node& w = parent(self, 1);
        Node& b = parent(self, 2);
        if (b.requires_grad) {
          auto& gb = b.grad_buffer();
          for (std::size_t c = 0; c < c_out; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < oh * ow; ++i) acc += self.grad[c * oh * ow + i];
            gb[c] += acc;
          }
        }
        if (!x.requires_grad && !w.requires_grad) return;
        std::vector<double> col, dcol, dout;
        for (std::size_t r0 = 0; r0 < oh; r0 += tile_rows) {
          const std::size_t r1 = std::min(oh, r0 + tile_rows);
          const std::size_t cols = (r1 - r0) * ow;
          std::span<const double> dout_view;
          if (r1 - r0 == oh) {
            dout_view = self.grad;
          } else {
            dout.resize(c_out * cols);
            for (std::size_t c = 0; c < c_out; ++c)
              std::copy_n(self.grad.begin() + c * oh * ow + r0 * ow, cols,
                          dout.begin() + c * cols);
            dout_view = dout;
          }
          if (w.requires_grad) {
            std::span<const double> col_view;
            if (pointwise) {
              col_view = x.data;
            } else {
              col.resize(patch * cols);
              k::im2col(g, x.data, r0, r1, col);
              col_view = col;
            }
            k::gemm_nt(c_out, patch, cols, dout_view, col_view, w.grad_buffer(), true);
          }
          if (x.requires_grad) {
            if (pointwise) {
              k::gemm_tn(patch, cols, c_out, w.data, dout_view, x.grad_buffer(), true);
            } else {
              dcol.resize(patch * cols);
              k::gemm_tn(patch, cols, c_out, w.data, dout_view, dcol, false);
              k::col2im(g, dcol, r0, r1, x.grad_buffer());
            }
          }
        }
      });
}

Tensor maxpool2x2(const Tensor& input) {
  require_rank(input, 3, "maxpool2x2");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (h < 2 || w < 2) throw ShapeError("maxpool2x2: spatial dims must be >= 2");
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<double> out(c * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  k::maxpool2x2(c, h, w, input.data(), out, argmax);
  return make_result({c, oh, ow}, std::move(out), {input},
                     [argmax = std::move(argmax)](Node& self) {
                       auto& g = parent(self, 0).grad_buffer();
                       for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += self.grad[i];
                     });
}

}  // namespace ascore::numerics
