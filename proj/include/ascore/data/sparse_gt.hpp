#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ascore/data/keypoints.hpp"
#include "ascore/data/scene.hpp"
#include "ascore/geometry/multiview.hpp"

namespace ascore::data {

struct SparseGtConfig {
  DetectorConfig detector;
  double epipolar_gate_px = 2.0;   // symmetric epipolar distance for candidate pairs
  double support_radius_px = 2.0;  // reprojection radius for counting supporting views
  std::size_t min_views = 3;
  // Minimum fraction of the views where a point projects inside the image
  // that must also contain a supporting keypoint.
  double min_support_ratio = 0.5;
  double max_error_px = 2.0;       // bound on mean and per-view reprojection error after BA
  geometry::BundleAdjustConfig bundle_adjust;

  void validate() const;
};

// Keypoints of one frame. `coords` and `valid` are filled for keypoints that
// belong to a surviving track; `track` is the index into tracks or -1.
struct FrameKeypoints {
  std::size_t frame_index = 0;  // index into SceneDataset::frames
  std::vector<geometry::Vec2> pixels;
  std::vector<geometry::Vec3> coords;
  std::vector<std::uint8_t> valid;
  std::vector<std::ptrdiff_t> track;
};

struct SparseGroundTruth {
  std::vector<FrameKeypoints> frames;
  // Observation camera indices refer to SceneDataset::frames.
  std::vector<geometry::Track> tracks;
  double triangulated_error_px = 0.0;  // mean reprojection error before BA
  double adjusted_error_px = 0.0;      // mean reprojection error after BA
};

// Keypoint pixels for one frame. Defaults to detect_keypoints on the image.
using KeypointDetector = std::function<std::vector<geometry::Vec2>(const Frame&)>;

// Matches keypoints across the given frames with known poses. Every pair of
// keypoints within the epipolar gate is triangulated; the point's support is
// the set of views with a keypoint within support_radius of its reprojection.
// Each keypoint keeps its best-supported hypothesis, and hypotheses are
// accepted greedily (most views, then smallest mean distance) using only
// keypoints not claimed by an earlier track. Hypotheses supported in fewer
// than min_views views, or in less than min_support_ratio of the views that
// see the point, are dropped. Survivors are triangulated with all views, bundle
// adjusted, and kept when the mean and every per-view reprojection error stay
// within max_error_px. Throws Error when no track survives.
SparseGroundTruth build_sparse_gt(const SceneDataset& dataset,
                                  std::span<const std::size_t> frame_indices,
                                  const SparseGtConfig& config,
                                  const KeypointDetector& detector = {});

}  // namespace ascore::data
