#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ascore/data/pnm.hpp"
#include "ascore/numerics/tensor.hpp"
#include "ascore/training/model.hpp"

namespace ascore::cli {

// Grayscale values in [0, 1], row-major.
struct HeatmapImage {
  std::size_t layer = 0;
  std::size_t head = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;
};

// Mean over queries (rows) of an [N, N] attention matrix: one score per key.
std::vector<double> key_scores(const numerics::Tensor& attention);

// Min-max normalizes grid scores (a constant grid maps to 0) and upsamples
// each cell to a `scale` x `scale` block.
HeatmapImage scores_to_heatmap(const std::vector<double>& scores, std::size_t grid_width,
                               std::size_t grid_height, std::size_t scale = 8);

// Heatmaps for one layer: every head, or only `head` when given. The image
// must already be padded to multiples of 8. Throws ShapeError for an
// out-of-range layer or head.
std::vector<HeatmapImage> render_attention(const numerics::Tensor& image,
                                           const training::Model& model, std::size_t layer,
                                           std::optional<std::size_t> head = std::nullopt);

// 8-bit P5 payload with values round(255 v).
data::GrayImage to_gray(const HeatmapImage& heatmap);

}  // namespace ascore::cli
