#include "ascore/heads/heads.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "ascore/error.hpp"
#include "ascore/numerics/ops.hpp"

namespace ascore::heads {

namespace ops = numerics;

MlpHead::MlpHead(std::vector<std::size_t> widths, std::mt19937_64& rng, const std::string& prefix)
    : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ConfigError("mlp head needs at least an input and output width");
  if (widths_.back() != 3) throw ConfigError("mlp head must end in 3 outputs");
  for (std::size_t w : widths_)
    if (w == 0) throw ConfigError("mlp head widths must be positive");
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    const std::size_t in = widths_[i];
    const std::size_t out = widths_[i + 1];
    const bool last = i + 2 == widths_.size();
    const std::string name = prefix + "fc" + std::to_string(i);
    Tensor w = last ? ops::uniform({out, in}, -std::sqrt(3.0 / in), std::sqrt(3.0 / in), rng, true)
                    : ops::he_uniform({out, in}, in, rng);
    weights_.push_back(params_.add(name + ".weight", std::move(w)));
    biases_.push_back(params_.add(name + ".bias", Tensor::zeros({out}, true)));
  }
}

Tensor MlpHead::operator()(const Tensor& features) const {
  if (features.rank() != 2 || features.dim(1) != input_dim())
    throw ShapeError("mlp head: expected [N, " + std::to_string(input_dim()) + "] input, got " +
                     ops::shape_string(features.shape()));
  Tensor x = features;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    x = ops::linear(x, weights_[i], biases_[i]);
    if (i + 1 < weights_.size()) x = ops::relu(x);
  }
  return x;
}

std::vector<std::size_t> default_head_widths(std::size_t descriptor_dim) {
  return {descriptor_dim, 512, 1024, 1024, 3};
}

std::vector<Keypoint> normalize_keypoints(std::span<const Vec2> pixels, std::size_t image_width,
                                          std::size_t image_height) {
  if (image_width < 2 || image_height < 2)
    throw ShapeError("normalize_keypoints: image must be at least 2x2");
  const double wm = static_cast<double>(image_width - 1);
  const double hm = static_cast<double>(image_height - 1);
  std::vector<Keypoint> out;
  out.reserve(pixels.size());
  for (const Vec2& p : pixels) {
    if (!(p.x() >= 0.0 && p.x() <= wm && p.y() >= 0.0 && p.y() <= hm))
      throw ShapeError("normalize_keypoints: pixel (" + std::to_string(p.x()) + ", " +
                       std::to_string(p.y()) + ") outside the image");
    out.push_back({p, Vec2(2.0 * p.x() / wm - 1.0, 2.0 * p.y() / hm - 1.0)});
  }
  return out;
}

Vec2 grid_position(const Vec2& normalized, std::size_t grid_width, std::size_t grid_height) {
  return Vec2((normalized.x() + 1.0) * 0.5 * static_cast<double>(grid_width - 1),
              (normalized.y() + 1.0) * 0.5 * static_cast<double>(grid_height - 1));
}

BilinearWeights bilinear_weights(const Vec2& normalized, std::size_t grid_width,
                                 std::size_t grid_height) {
  if (grid_width == 0 || grid_height == 0) throw ShapeError("bilinear_sample: empty grid");
  if (!(std::abs(normalized.x()) <= 1.0 && std::abs(normalized.y()) <= 1.0))
    throw ShapeError("bilinear_sample: coordinate (" + std::to_string(normalized.x()) + ", " +
                     std::to_string(normalized.y()) + ") outside [-1, 1]");
  const Vec2 g = grid_position(normalized, grid_width, grid_height);
  auto corner = [](double v, std::size_t n, std::size_t& lo, std::size_t& hi, double& frac) {
    if (n == 1) {
      lo = hi = 0;
      frac = 0.0;
      return;
    }
    // Snap round-off so that cell centers sample exactly one cell.
    const double nearest = std::round(v);
    if (std::abs(v - nearest) <= 1e-12 * static_cast<double>(n)) v = nearest;
    lo = std::min(static_cast<std::size_t>(std::floor(v)), n - 2);
    hi = lo + 1;
    frac = v - static_cast<double>(lo);
  };
  BilinearWeights w;
  double du = 0.0;
  double dv = 0.0;
  corner(g.x(), grid_width, w.x0, w.x1, du);
  corner(g.y(), grid_height, w.y0, w.y1, dv);
  w.w00 = (1.0 - du) * (1.0 - dv);
  w.w10 = du * (1.0 - dv);
  w.w01 = (1.0 - du) * dv;
  w.w11 = du * dv;
  return w;
}

Tensor bilinear_sample(const Tensor& map, std::span<const Vec2> normalized) {
  if (map.rank() != 3) throw ShapeError("bilinear_sample: map must be [D, h, w]");
  const std::size_t d = map.dim(0);
  const std::size_t gh = map.dim(1);
  const std::size_t gw = map.dim(2);
  const std::size_t plane = gh * gw;
  const std::size_t m = normalized.size();
  if (m == 0) throw ShapeError("bilinear_sample: no sample points");

  std::vector<BilinearWeights> weights;
  weights.reserve(m);
  for (const Vec2& p : normalized) weights.push_back(bilinear_weights(p, gw, gh));

  // Flat cell offsets and weights of the four corners.
  auto corners = [gw](const BilinearWeights& w) {
    return std::array<std::pair<std::size_t, double>, 4>{
        {{w.y0 * gw + w.x0, w.w00}, {w.y0 * gw + w.x1, w.w10},
         {w.y1 * gw + w.x0, w.w01}, {w.y1 * gw + w.x1, w.w11}}};
  };

  const auto src = map.data();
  std::vector<double> out(m * d, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto cs = corners(weights[i]);
    for (std::size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (const auto& [cell, w] : cs)
        if (w != 0.0) acc += w * src[c * plane + cell];
      out[i * d + c] = acc;
    }
  }
  return ops::make_result({m, d}, std::move(out), {map},
                          [weights = std::move(weights), corners, d, plane](ops::Node& self) {
                            auto& g = self.parents[0]->grad_buffer();
                            for (std::size_t i = 0; i < weights.size(); ++i) {
                              const auto cs = corners(weights[i]);
                              for (std::size_t c = 0; c < d; ++c) {
                                const double go = self.grad[i * d + c];
                                for (const auto& [cell, w] : cs) g[c * plane + cell] += w * go;
                              }
                            }
                          });
}

Tensor dense_coordinates(const Tensor& map, const MlpHead& head) {
  if (map.rank() != 3 || map.dim(0) != head.input_dim())
    throw ShapeError("dense_predict: map " + ops::shape_string(map.shape()) +
                     " does not match head input " + std::to_string(head.input_dim()));
  const std::size_t d = map.dim(0);
  return head(ops::transpose(ops::reshape(map, {d, map.dim(1) * map.dim(2)})));
}

geometry::SceneCoordinateMap dense_predict(const encoder::AttentionFeatureMap& map,
                                           const MlpHead& head) {
  const Tensor coords = dense_coordinates(map.data, head);
  geometry::SceneCoordinateMap out(map.grid_width(), map.grid_height());
  const auto v = coords.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.points[i] = Vec3(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
    out.valid[i] = 1;
  }
  return out;
}

Tensor sparse_coordinates(const Tensor& map, std::span<const Vec2> normalized,
                          const MlpHead& head) {
  if (map.rank() != 3 || map.dim(0) != head.input_dim())
    throw ShapeError("sparse_predict: map " + ops::shape_string(map.shape()) +
                     " does not match head input " + std::to_string(head.input_dim()));
  return head(bilinear_sample(map, normalized));
}

std::vector<SparsePrediction> sparse_predict(const encoder::AttentionFeatureMap& map,
                                             std::span<const Keypoint> keypoints,
                                             const MlpHead& head) {
  std::vector<SparsePrediction> out;
  if (keypoints.empty()) return out;
  std::vector<Vec2> normalized;
  normalized.reserve(keypoints.size());
  for (const auto& k : keypoints) normalized.push_back(k.normalized);
  const Tensor coords = sparse_coordinates(map.data, normalized, head);
  const auto v = coords.data();
  out.reserve(keypoints.size());
  for (std::size_t i = 0; i < keypoints.size(); ++i)
    out.push_back({keypoints[i], Vec3(v[3 * i], v[3 * i + 1], v[3 * i + 2])});
  return out;
}

}  // namespace ascore::heads
