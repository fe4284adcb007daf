#pragma once

#include <filesystem>
#include <string>

#include "ascore/geometry/camera.hpp"

namespace ascore::geometry {

// 16 whitespace-separated numbers, row-major 4x4 world-to-camera matrix.
Pose read_pose_file(const std::filesystem::path& path);
void write_pose_file(const std::filesystem::path& path, const Pose& pose);
Pose parse_pose(const std::string& text);
std::string format_pose(const Pose& pose);

// One line: "fx fy cx cy".
CameraIntrinsics read_intrinsics_file(const std::filesystem::path& path);
void write_intrinsics_file(const std::filesystem::path& path, const CameraIntrinsics& k);

}  // namespace ascore::geometry
