#include "ascore/geometry/camera.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "ascore/error.hpp"

namespace ascore::geometry {

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Vec3 CameraIntrinsics::ray(const Vec2& pixel) const {
  return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy, 1.0};
}

Vec2 CameraIntrinsics::to_pixel(const Vec3& p) const {
  return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("intrinsics: focal lengths must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy))
    throw ConfigError("intrinsics: principal point must be finite");
}

Pose Pose::from_matrix(const Mat4& m) {
  Pose p;
  p.rotation = m.topLeftCorner<3, 3>();
  p.translation = m.topRightCorner<3, 1>();
  return p;
}

Pose Pose::look_at(const Vec3& center, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - center).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Pose p;
  p.rotation.row(0) = right.transpose();
  p.rotation.row(1) = down.transpose();
  p.rotation.row(2) = forward.transpose();
  p.translation = -p.rotation * center;
  return p;
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose Pose::inverse() const {
  Pose p;
  p.rotation = rotation.transpose();
  p.translation = -p.rotation * translation;
  return p;
}

bool Pose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Projection project(const Pose& pose, const CameraIntrinsics& k, const Vec3& world) {
  const Vec3 cam = pose.transform(world);
  if (cam.z() <= 1e-9) throw BehindCamera("point is behind the camera");
  return {k.to_pixel(cam), cam.z()};
}

std::size_t SceneCoordinateMap::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

SceneCoordinateMap backproject(const DepthMap& depth, const CameraIntrinsics& k, const Pose& pose) {
  SceneCoordinateMap out(depth.width, depth.height);
  const Mat3 rt = pose.rotation.transpose();
  for (std::size_t v = 0; v < depth.height; ++v)
    for (std::size_t u = 0; u < depth.width; ++u) {
      const double d = depth.at(u, v);
      if (!(d > 0.0)) continue;
      const Vec3 cam = d * k.ray({static_cast<double>(u), static_cast<double>(v)});
      out.points[v * depth.width + u] = rt * (cam - pose.translation);
      out.valid[v * depth.width + u] = 1;
    }
  return out;
}

}  // namespace ascore::geometry
