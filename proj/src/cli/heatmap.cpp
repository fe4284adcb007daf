#include "ascore/cli/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ascore/error.hpp"

namespace ascore::cli {

std::vector<double> key_scores(const numerics::Tensor& attention) {
  if (attention.rank() != 2 || attention.dim(0) != attention.dim(1))
    throw ShapeError("key_scores: expected a square matrix, got " +
                     numerics::shape_string(attention.shape()));
  const std::size_t n = attention.dim(0);
  std::vector<double> out(n, 0.0);
  for (std::size_t q = 0; q < n; ++q)
    for (std::size_t k = 0; k < n; ++k) out[k] += attention[q * n + k];
  for (double& v : out) v /= static_cast<double>(n);
  return out;
}

HeatmapImage scores_to_heatmap(const std::vector<double>& scores, std::size_t grid_width,
                               std::size_t grid_height, std::size_t scale) {
  if (scores.size() != grid_width * grid_height || scores.empty() || scale == 0)
    throw ShapeError("scores_to_heatmap: " + std::to_string(scores.size()) +
                     " scores for a " + std::to_string(grid_width) + "x" +
                     std::to_string(grid_height) + " grid");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double range = *hi - *lo;
  HeatmapImage img;
  img.width = grid_width * scale;
  img.height = grid_height * scale;
  img.values.resize(img.width * img.height);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double s = scores[(y / scale) * grid_width + x / scale];
      img.values[y * img.width + x] = range > 0.0 ? std::clamp((s - *lo) / range, 0.0, 1.0) : 0.0;
    }
  return img;
}

std::vector<HeatmapImage> render_attention(const numerics::Tensor& image,
                                           const training::Model& model, std::size_t layer,
                                           std::optional<std::size_t> head) {
  const auto& cfg = model.config().encoder;
  if (layer >= cfg.num_layers)
    throw ShapeError("render_attention: layer " + std::to_string(layer) + " out of range (model has " +
                     std::to_string(cfg.num_layers) + ")");
  if (head && *head >= cfg.num_heads)
    throw ShapeError("render_attention: head " + std::to_string(*head) + " out of range (model has " +
                     std::to_string(cfg.num_heads) + ")");
  numerics::NoGradGuard no_grad;
  const auto features = model.encoder()(image, true);
  std::vector<HeatmapImage> out;
  for (std::size_t h = 0; h < cfg.num_heads; ++h) {
    if (head && h != *head) continue;
    HeatmapImage img = scores_to_heatmap(key_scores(features.attention[layer][h]),
                                         features.grid_width(), features.grid_height());
    img.layer = layer;
    img.head = h;
    out.push_back(std::move(img));
  }
  return out;
}

data::GrayImage to_gray(const HeatmapImage& heatmap) {
  data::GrayImage g{heatmap.width, heatmap.height, 255, {}};
  g.pixels.reserve(heatmap.values.size());
  for (double v : heatmap.values)
    g.pixels.push_back(static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  return g;
}

}  // namespace ascore::cli
