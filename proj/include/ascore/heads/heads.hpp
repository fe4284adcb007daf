#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ascore/encoder/encoder.hpp"
#include "ascore/geometry/camera.hpp"
#include "ascore/numerics/parameters.hpp"
#include "ascore/numerics/tensor.hpp"

namespace ascore::heads {

using geometry::Vec2;
using geometry::Vec3;
using numerics::ParameterSet;
using numerics::Tensor;

// Phi: R^D -> R^3. Widths list every layer including input and output,
// e.g. (256, 512, 1024, 1024, 3). ReLU between hidden layers, linear output.
class MlpHead {
 public:
  MlpHead(std::vector<std::size_t> widths, std::mt19937_64& rng, const std::string& prefix = "head.");

  // [N, D_in] -> [N, 3]
  Tensor operator()(const Tensor& features) const;

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t input_dim() const { return widths_.front(); }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

 private:
  std::vector<std::size_t> widths_;
  ParameterSet params_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
};

std::vector<std::size_t> default_head_widths(std::size_t descriptor_dim);

struct Keypoint {
  Vec2 pixel = Vec2::Zero();
  Vec2 normalized = Vec2::Zero();
};

// u_n = 2u/(W-1) - 1, v_n = 2v/(H-1) - 1. Throws ShapeError for pixels outside the image.
std::vector<Keypoint> normalize_keypoints(std::span<const Vec2> pixels, std::size_t image_width,
                                          std::size_t image_height);

// Grid position (x, y) in cell units for a normalized coordinate; -1 maps to
// cell 0 and +1 to the last cell (align corners).
Vec2 grid_position(const Vec2& normalized, std::size_t grid_width, std::size_t grid_height);

struct BilinearWeights {
  std::size_t x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  double w00 = 0.0, w10 = 0.0, w01 = 0.0, w11 = 0.0;  // w_ab: a indexes x, b indexes y
};

// Corner cells and weights for one normalized sample. Throws ShapeError
// outside [-1, 1].
BilinearWeights bilinear_weights(const Vec2& normalized, std::size_t grid_width,
                                 std::size_t grid_height);

// map [D, h, w], M >= 1 normalized points -> [M, D]; differentiable w.r.t. the map.
Tensor bilinear_sample(const Tensor& map, std::span<const Vec2> normalized);

// Differentiable [N_H, 3] predictions, row-major over cells.
Tensor dense_coordinates(const Tensor& map, const MlpHead& head);
// Phi at every cell of the grid; the mask is all true.
geometry::SceneCoordinateMap dense_predict(const encoder::AttentionFeatureMap& map,
                                           const MlpHead& head);

struct SparsePrediction {
  Keypoint keypoint;
  Vec3 scene = Vec3::Zero();
};

// Differentiable [M, 3] predictions for normalized keypoints.
Tensor sparse_coordinates(const Tensor& map, std::span<const Vec2> normalized, const MlpHead& head);
std::vector<SparsePrediction> sparse_predict(const encoder::AttentionFeatureMap& map,
                                             std::span<const Keypoint> keypoints,
                                             const MlpHead& head);

}  // namespace ascore::heads
