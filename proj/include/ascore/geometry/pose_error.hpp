#pragma once

#include "ascore/geometry/camera.hpp"

namespace ascore::geometry {

struct PoseError {
  double translation_cm = 0.0;  // distance between camera centers
  double rotation_deg = 0.0;    // angle of R_est * R_gt^T
};

PoseError pose_error(const Pose& estimate, const Pose& ground_truth);

}  // namespace ascore::geometry
