#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "ascore/data/pnm.hpp"
#include "ascore/geometry/camera.hpp"
#include "ascore/numerics/tensor.hpp"

namespace ascore::data {

using geometry::CameraIntrinsics;
using geometry::DepthMap;
using geometry::Pose;
using numerics::Tensor;

enum class Split { train, test };

// One posed RGB(-D) view. Image and depth are stored padded to multiples of 8;
// `intrinsics` refers to the padded image.
struct Frame {
  std::size_t id = 0;
  Split split = Split::train;
  Tensor image;                  // [3, H, W], values in [0, 1]
  std::optional<DepthMap> depth;  // meters, 0 = invalid, same size as image
  Pose pose;
  CameraIntrinsics intrinsics;
  std::size_t original_width = 0;
  std::size_t original_height = 0;
  std::size_t pad_left = 0;
  std::size_t pad_top = 0;

  std::size_t width() const { return image.dim(2); }
  std::size_t height() const { return image.dim(1); }
};

struct SceneDataset {
  std::vector<Frame> frames;

  std::vector<std::size_t> indices(Split split) const;
};

// Pixels k/255 as a [3, H, W] tensor, and back (values rounded and clamped).
Tensor image_tensor(const RgbImage& image);
RgbImage to_rgb(const Tensor& image);

// Builds a frame from an unpadded view: reflect-pads the image to multiples of
// 8 (left = total / 2, top likewise), pads depth with zeros, shifts cx and cy
// by the left and top padding and records the original size.
Frame make_frame(std::size_t id, Split split, const RgbImage& image,
                 std::optional<DepthMap> depth, const Pose& pose,
                 const CameraIntrinsics& intrinsics);

// Layout: intrinsics.txt, frames/%06d.ppm, depth/%06d.pgm (16-bit mm),
// poses/%06d.txt, split.txt. Frames are written at their original size.
// All frames must share one set of intrinsics.
void save_scene(const SceneDataset& dataset, const std::filesystem::path& dir);
SceneDataset load_scene(const std::filesystem::path& dir);

// Meters to 16-bit millimeters and back; depths above 65.535 m throw IoError.
std::uint16_t depth_to_millimeters(double meters);
double millimeters_to_depth(std::uint16_t mm);

// Backprojects the frame's depth and keeps pixel (8j + 4, 8i + 4) for grid
// cell (row i, column j). Throws Error when the frame has no depth.
geometry::SceneCoordinateMap derive_dense_gt(const Frame& frame);

// Pixel of the cell center used by dense ground truth and localization.
inline geometry::Vec2 cell_center_pixel(std::size_t col, std::size_t row) {
  return {8.0 * static_cast<double>(col) + 4.0, 8.0 * static_cast<double>(row) + 4.0};
}

}  // namespace ascore::data
