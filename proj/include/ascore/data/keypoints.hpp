#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ascore/geometry/camera.hpp"
#include "ascore/numerics/tensor.hpp"

namespace ascore::data {

struct DetectorConfig {
  std::size_t max_count = 200;
  double harris_k = 0.04;
  std::size_t nms_radius = 4;     // Chebyshev radius, pixels
  double min_response = 1e-6;     // responses at or below this are ignored
  std::size_t border = 4;         // pixels closer than this to an edge are skipped
  bool subpixel = true;           // refine each axis by a parabola through the response

  void validate() const;
};

struct DetectedKeypoint {
  geometry::Vec2 pixel = geometry::Vec2::Zero();  // (column, row)
  double response = 0.0;
};

// Gray = 0.299 R + 0.587 G + 0.114 B.
std::vector<double> grayscale(const numerics::Tensor& image);

// Harris response det(M) - k trace(M)^2 per pixel, with M built from Sobel
// gradients smoothed by the 3x3 binomial window. Pixels within two of the
// edge get zero.
std::vector<double> harris_response(const std::vector<double>& gray, std::size_t width,
                                    std::size_t height, double k);

// Candidates above min_response sorted by (-response, row, column); a
// candidate survives when no stronger survivor lies within nms_radius. At
// most max_count keypoints are returned, in that order. With subpixel set,
// each position moves to the peak of the parabola through the response and
// its two neighbors along each axis (at most half a pixel).
std::vector<DetectedKeypoint> detect_keypoints(const numerics::Tensor& image,
                                               const DetectorConfig& config = {});

// Hash over the detector's configuration and fixed filter taps.
std::uint64_t detector_fingerprint(const DetectorConfig& config);

}  // namespace ascore::data
