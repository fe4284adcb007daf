#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ascore/geometry/camera.hpp"

namespace ascore::geometry {

struct Correspondence2D3D {
  Vec2 pixel = Vec2::Zero();
  Vec3 scene = Vec3::Zero();
};

struct RansacConfig {
  double inlier_threshold_px = 10.0;
  std::size_t max_hypotheses = 256;
  double early_exit_inlier_ratio = 0.9;
  std::size_t refine_iterations = 20;
  std::uint64_t seed = 0;
};

struct PnpResult {
  Pose pose;
  std::vector<std::uint8_t> inliers;
  std::size_t inlier_count = 0;
  std::size_t hypotheses = 0;  // minimal samples drawn
};

// All camera poses consistent with three bearing/world pairs (Grunert's P3P).
// Bearings are unit camera-frame rays. Returns up to four solutions.
std::vector<Pose> solve_p3p(std::span<const Vec3, 3> bearings, std::span<const Vec3, 3> points);

// Levenberg-Marquardt on the reprojection error of all given correspondences.
Pose refine_pose(const Pose& initial, std::span<const Correspondence2D3D> correspondences,
                 const CameraIntrinsics& k, std::size_t iterations);

// Minimal 4-point hypotheses (P3P on three points, fourth point disambiguates),
// scored by inlier count; hypotheses are evaluated in draw order and ties keep
// the earlier one. The winner is refined on its inliers and the mask recomputed.
// Throws InsufficientPoints (< 4 correspondences) or NoConsensus.
PnpResult pnp_ransac(std::span<const Correspondence2D3D> correspondences,
                     const CameraIntrinsics& k, const RansacConfig& config = {});

}  // namespace ascore::geometry
