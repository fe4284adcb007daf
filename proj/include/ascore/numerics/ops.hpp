#pragma once

#include <cstddef>

#include "ascore/numerics/tensor.hpp"

namespace ascore::numerics {

// Elementwise, same shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// Adds a constant (non-differentiable) tensor of the same shape.
Tensor add_constant(const Tensor& a, const Tensor& constant);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis);
// Contiguous slice [start, start+length) along `axis`.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);  // rank 2 only

// [M,K] x [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);
// [M,K] x [N,K]^T -> [M,N]
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// input [N,in], weight [out,in], bias [out] -> [N,out]
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

// input [C_in,H,W], weight [C_out,C_in,kh,kw], bias [C_out] -> [C_out,H',W']
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);
// [C,H,W] -> [C,H/2,W/2]
Tensor maxpool2x2(const Tensor& input);

}  // namespace ascore::numerics
