#include "ascore/geometry/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ascore/error.hpp"

namespace ascore::geometry {

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out || !(out << text)) throw IoError("cannot write " + path.string());
}

}  // namespace

Pose parse_pose(const std::string& text) {
  std::istringstream in(text);
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      if (!(in >> m(r, c))) throw IoError("pose: expected 16 numbers");
  std::string extra;
  if (in >> extra) throw IoError("pose: trailing content '" + extra + "'");
  if (std::abs(m(3, 0)) > 1e-9 || std::abs(m(3, 1)) > 1e-9 || std::abs(m(3, 2)) > 1e-9 ||
      std::abs(m(3, 3) - 1.0) > 1e-9)
    throw IoError("pose: last row must be 0 0 0 1");
  return Pose::from_matrix(m);
}

std::string format_pose(const Pose& pose) {
  const Mat4 m = pose.matrix();
  std::ostringstream out;
  out << std::setprecision(17);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out << (c ? " " : "") << m(r, c);
    out << '\n';
  }
  return out.str();
}

Pose read_pose_file(const std::filesystem::path& path) {
  try {
    return parse_pose(slurp(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_pose_file(const std::filesystem::path& path, const Pose& pose) {
  write_text(path, format_pose(pose));
}

CameraIntrinsics read_intrinsics_file(const std::filesystem::path& path) {
  std::istringstream in(slurp(path));
  CameraIntrinsics k;
  if (!(in >> k.fx >> k.fy >> k.cx >> k.cy))
    throw IoError(path.string() + ": expected \"fx fy cx cy\"");
  try {
    k.validate();
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return k;
}

void write_intrinsics_file(const std::filesystem::path& path, const CameraIntrinsics& k) {
  std::ostringstream out;
  out << std::setprecision(17) << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << '\n';
  write_text(path, out.str());
}

}  // namespace ascore::geometry
