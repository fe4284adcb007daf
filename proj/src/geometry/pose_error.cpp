#include "ascore/geometry/pose_error.hpp"

#include <cmath>
#include <numbers>

namespace ascore::geometry {

PoseError pose_error(const Pose& estimate, const Pose& ground_truth) {
  PoseError e;
  e.translation_cm = 100.0 * (estimate.center() - ground_truth.center()).norm();
  // atan2 form of arccos((trace - 1) / 2); keeps resolution near zero angle.
  const Mat3 delta = estimate.rotation * ground_truth.rotation.transpose();
  const double cos_term = 0.5 * (delta.trace() - 1.0);
  const Vec3 axis(delta(2, 1) - delta(1, 2), delta(0, 2) - delta(2, 0), delta(1, 0) - delta(0, 1));
  const double sin_term = 0.5 * axis.norm();
  e.rotation_deg = std::atan2(sin_term, cos_term) * 180.0 / std::numbers::pi;
  return e;
}

}  // namespace ascore::geometry
