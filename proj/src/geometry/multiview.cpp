#include "ascore/geometry/multiview.hpp"

#include <cmath>
#include <limits>
#include <set>

#include <Eigen/SVD>

#include "ascore/error.hpp"

namespace ascore::geometry {

namespace {

void check_indices(const Track& track, std::span<const Pose> poses,
                   std::span<const CameraIntrinsics> intrinsics) {
  for (const auto& obs : track.observations)
    if (obs.camera_index >= poses.size() || obs.camera_index >= intrinsics.size())
      throw Error("observation references unknown camera " + std::to_string(obs.camera_index));
}

// Residual r = pi(x) - p and its 2x3 Jacobian w.r.t. x. Returns false if the
// point is not in front of the camera.
bool residual(const Pose& pose, const CameraIntrinsics& k, const Vec3& x, const Vec2& observed,
              Vec2& r, Eigen::Matrix<double, 2, 3>& j) {
  const Vec3 c = pose.transform(x);
  if (c.z() <= 1e-9) return false;
  const double iz = 1.0 / c.z();
  r = Vec2(k.fx * c.x() * iz + k.cx, k.fy * c.y() * iz + k.cy) - observed;
  Eigen::Matrix<double, 2, 3> dproj;
  dproj << k.fx * iz, 0.0, -k.fx * c.x() * iz * iz, 0.0, k.fy * iz, -k.fy * c.y() * iz * iz;
  j = dproj * pose.rotation;
  return true;
}

struct PointFit {
  Vec3 point;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  bool damping_exceeded = false;
};

PointFit refine_point(const Track& track, const Vec3& start, std::span<const Pose> poses,
                      std::span<const CameraIntrinsics> intrinsics,
                      const BundleAdjustConfig& config) {
  PointFit fit;
  fit.point = start;
  fit.initial_cost = reprojection_cost(track, start, poses, intrinsics);
  double cost = fit.initial_cost;
  double lambda = config.initial_damping;

  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    if (cost <= 1e-24) break;
    Mat3 jtj = Mat3::Zero();
    Vec3 jtr = Vec3::Zero();
    for (const auto& obs : track.observations) {
      Vec2 r;
      Eigen::Matrix<double, 2, 3> j;
      if (!residual(poses[obs.camera_index], intrinsics[obs.camera_index], fit.point, obs.pixel,
                    r, j))
        continue;
      jtj += j.transpose() * j;
      jtr += j.transpose() * r;
    }
    if (jtr.norm() <= 1e-15 * (1.0 + jtj.norm())) break;

    bool accepted = false;
    while (!accepted) {
      Mat3 damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Vec3 step = damped.ldlt().solve(-jtr);
      const Vec3 candidate = fit.point + step;
      const double candidate_cost = reprojection_cost(track, candidate, poses, intrinsics);
      if (std::isfinite(candidate_cost) && candidate_cost <= cost) {
        const double decrease = cost - candidate_cost;
        fit.point = candidate;
        cost = candidate_cost;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (decrease <= config.tolerance * cost ||
            step.norm() <= config.tolerance * (fit.point.norm() + config.tolerance)) {
          fit.final_cost = cost;
          return fit;
        }
      } else {
        lambda *= 10.0;
        if (lambda > config.max_damping) {
          fit.damping_exceeded = true;
          fit.final_cost = cost;
          return fit;
        }
      }
    }
  }
  fit.final_cost = cost;
  return fit;
}

}  // namespace

Vec3 triangulate(const Track& track, std::span<const Pose> poses,
                 std::span<const CameraIntrinsics> intrinsics) {
  check_indices(track, poses, intrinsics);
  std::set<std::size_t> cameras;
  for (const auto& obs : track.observations) cameras.insert(obs.camera_index);
  if (track.observations.size() < 2 || cameras.size() < 2)
    throw DegenerateTriangulation("triangulation needs observations from two distinct cameras");

  const std::size_t n = track.observations.size();
  Eigen::MatrixXd a(2 * n, 4);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& obs = track.observations[i];
    const Pose& pose = poses[obs.camera_index];
    const Vec3 ray = intrinsics[obs.camera_index].ray(obs.pixel);
    Eigen::Matrix<double, 3, 4> p;
    p.leftCols<3>() = pose.rotation;
    p.col(3) = pose.translation;
    a.row(2 * i) = ray.x() * p.row(2) - p.row(0);
    a.row(2 * i + 1) = ray.y() * p.row(2) - p.row(1);
  }
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double norm = a.row(r).norm();
    if (norm > 0.0) a.row(r) /= norm;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (!(s(2) > 1e-12 * s(0)))
    throw DegenerateTriangulation("triangulation system is rank deficient");
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h(3)) <= 1e-12 * h.head<3>().norm())
    throw DegenerateTriangulation("rays are parallel (point at infinity)");
  const Vec3 x = h.head<3>() / h(3);
  for (const auto& obs : track.observations)
    if (poses[obs.camera_index].transform(x).z() <= 1e-9)
      throw DegenerateTriangulation("triangulated point lies behind an observing camera");
  return x;
}

double reprojection_cost(const Track& track, const Vec3& point, std::span<const Pose> poses,
                         std::span<const CameraIntrinsics> intrinsics) {
  double cost = 0.0;
  for (const auto& obs : track.observations) {
    const Vec3 c = poses[obs.camera_index].transform(point);
    if (c.z() <= 1e-9) return std::numeric_limits<double>::infinity();
    cost += (intrinsics[obs.camera_index].to_pixel(c) - obs.pixel).squaredNorm();
  }
  return cost;
}

BundleAdjustResult bundle_adjust_points(std::span<const Track> tracks, std::span<const Pose> poses,
                                        std::span<const CameraIntrinsics> intrinsics,
                                        const BundleAdjustConfig& config) {
  BundleAdjustResult result;
  result.tracks.assign(tracks.begin(), tracks.end());
  result.initial_costs.resize(tracks.size());
  result.final_costs.resize(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const Track& track = tracks[i];
    check_indices(track, poses, intrinsics);
    if (!track.point) throw Error("bundle adjustment requires triangulated tracks");
    const PointFit fit = refine_point(track, *track.point, poses, intrinsics, config);
    Track& out = result.tracks[i];
    out.point = fit.point;
    for (auto& obs : out.observations) obs.depth_scale = poses[obs.camera_index].transform(fit.point).z();
    result.initial_costs[i] = fit.initial_cost;
    result.final_costs[i] = fit.final_cost;
    result.initial_cost += fit.initial_cost;
    result.final_cost += fit.final_cost;
    result.damping_exceeded = result.damping_exceeded || fit.damping_exceeded;
  }
  return result;
}

}  // namespace ascore::geometry
