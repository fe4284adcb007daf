#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ascore/geometry/camera.hpp"

namespace ascore::geometry {

struct Observation {
  std::size_t camera_index = 0;
  Vec2 pixel = Vec2::Zero();
  std::optional<double> depth_scale;  // lambda in lambda * p = K T x, filled by triangulation
};

struct Track {
  std::vector<Observation> observations;
  std::optional<Vec3> point;
};

// Linear DLT on normalized image coordinates. Requires >= 2 observations from
// distinct cameras. Throws DegenerateTriangulation for rank-deficient systems
// (condition number above 1e12), points at infinity, or a solution behind any
// observing camera.
Vec3 triangulate(const Track& track, std::span<const Pose> poses,
                 std::span<const CameraIntrinsics> intrinsics);

// Sum of squared pixel residuals of one track's point over its observations.
double reprojection_cost(const Track& track, const Vec3& point, std::span<const Pose> poses,
                         std::span<const CameraIntrinsics> intrinsics);

struct BundleAdjustConfig {
  std::size_t max_iterations = 50;
  double tolerance = 1e-12;  // relative cost decrease and relative step size
  double initial_damping = 1e-3;
  double max_damping = 1e12;
};

struct BundleAdjustResult {
  std::vector<Track> tracks;
  std::vector<double> initial_costs;  // per track
  std::vector<double> final_costs;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  // Set when any track's damping grew past max_damping before converging;
  // that track keeps its best point so far.
  bool damping_exceeded = false;
};

// Levenberg-Marquardt over point positions only; poses and intrinsics are
// fixed, so every track solves an independent 3x3 system.
BundleAdjustResult bundle_adjust_points(std::span<const Track> tracks, std::span<const Pose> poses,
                                        std::span<const CameraIntrinsics> intrinsics,
                                        const BundleAdjustConfig& config = {});

}  // namespace ascore::geometry
