#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace ascore::geometry {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Pinhole calibration in pixels. Pixel (u, v) addresses the center of column
// u, row v.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  Mat3 matrix() const;
  // K^-1 (u, v, 1): camera-frame ray with unit z.
  Vec3 ray(const Vec2& pixel) const;
  Vec2 to_pixel(const Vec3& camera_point) const;
  void validate() const;

  bool operator==(const CameraIntrinsics&) const = default;
};

// World-to-camera rigid transform: p_cam = R * x_world + t.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose from_matrix(const Mat4& m);
  // Camera at `center` looking at `target`; image x right, y down.
  static Pose look_at(const Vec3& center, const Vec3& target, const Vec3& up = Vec3::UnitZ());

  Mat4 matrix() const;
  Vec3 transform(const Vec3& world) const { return rotation * world + translation; }
  Pose inverse() const;
  Vec3 center() const { return -rotation.transpose() * translation; }
  // R^T R = I and det R = +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

struct Projection {
  Vec2 pixel;
  double depth = 0.0;
};

// Throws BehindCamera when the camera-frame depth is <= 1e-9.
Projection project(const Pose& pose, const CameraIntrinsics& k, const Vec3& world);

// Depth in meters, row-major, 0 = invalid.
struct DepthMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  double at(std::size_t u, std::size_t v) const { return values[v * width + u]; }
};

// Per-cell 3D scene coordinates with a validity mask, row-major. Used both at
// full image resolution and on the 1/8 descriptor grid.
struct SceneCoordinateMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Vec3> points;
  std::vector<std::uint8_t> valid;

  SceneCoordinateMap() = default;
  SceneCoordinateMap(std::size_t w, std::size_t h)
      : width(w), height(h), points(w * h, Vec3::Zero()), valid(w * h, 0) {}

  std::size_t size() const { return width * height; }
  std::size_t valid_count() const;
  const Vec3& at(std::size_t col, std::size_t row) const { return points[row * width + col]; }
  bool is_valid(std::size_t col, std::size_t row) const { return valid[row * width + col] != 0; }
};

// x_world = R^T (d * K^-1 (u, v, 1) - t) for every pixel with d > 0.
SceneCoordinateMap backproject(const DepthMap& depth, const CameraIntrinsics& k, const Pose& pose);

}  // namespace ascore::geometry
