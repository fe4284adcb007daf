#pragma once

#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "ascore/geometry/camera.hpp"

namespace ascore::testing {

inline geometry::Mat3 random_rotation(std::mt19937_64& rng, double max_angle = 3.14159) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> a(0.0, max_angle);
  const geometry::Vec3 axis = geometry::Vec3(n(rng), n(rng), n(rng)).normalized();
  return Eigen::AngleAxisd(a(rng), axis).toRotationMatrix();
}

inline geometry::Pose random_pose(std::mt19937_64& rng, double max_angle = 3.14159,
                                  double max_translation = 1.0) {
  std::uniform_real_distribution<double> u(-max_translation, max_translation);
  geometry::Pose p;
  p.rotation = random_rotation(rng, max_angle);
  p.translation = geometry::Vec3(u(rng), u(rng), u(rng));
  return p;
}

inline geometry::CameraIntrinsics random_intrinsics(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> f(80.0, 800.0), c(20.0, 400.0);
  return {f(rng), f(rng), c(rng), c(rng)};
}

}  // namespace ascore::testing
