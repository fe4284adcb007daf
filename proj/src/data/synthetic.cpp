#include "ascore/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ascore/error.hpp"

namespace ascore::data {

using geometry::Vec2;
using geometry::Vec3;

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_cell(std::uint64_t seed, int face, std::int64_t a, std::int64_t b,
                        std::uint64_t salt) {
  std::uint64_t h = mix(seed ^ salt);
  h = mix(h ^ static_cast<std::uint64_t>(face));
  h = mix(h ^ static_cast<std::uint64_t>(a));
  return mix(h ^ static_cast<std::uint64_t>(b));
}

double unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

// In-plane coordinates of a point on a face.
Vec2 face_coords(int face, const Vec3& p) {
  switch (face / 2) {
    case 0: return {p.y(), p.z()};
    case 1: return {p.x(), p.z()};
    default: return {p.x(), p.y()};
  }
}

}  // namespace

void SyntheticSceneSpec::validate() const {
  if (!(room.minCoeff() > 0.0)) throw ConfigError("room dimensions must be positive");
  if (!(cell_size > 0.0) || !(noise_cell_size > 0.0))
    throw ConfigError("texture cell sizes must be positive");
  if (!(noise_amplitude >= 0.0 && noise_amplitude < 1.0))
    throw ConfigError("noise_amplitude must lie in [0, 1)");
  if (num_frames == 0) throw ConfigError("num_frames must be positive");
  if (width == 0 || height == 0) throw ConfigError("image size must be positive");
  if (supersample == 0) throw ConfigError("supersample must be positive");
  intrinsics.validate();
  for (std::size_t i = 0; i < num_frames; ++i) {
    const Vec3 c = camera_center(i);
    if ((c.array() <= 0.0).any() || (c.array() >= room.array()).any())
      throw ConfigError("camera " + std::to_string(i) + " at (" + std::to_string(c.x()) + ", " +
                        std::to_string(c.y()) + ", " + std::to_string(c.z()) +
                        ") lies outside the room");
  }
  if ((camera_center(0) - look_at).norm() < 1e-9)
    throw ConfigError("look_at coincides with a camera center");
}

Vec3 SyntheticSceneSpec::camera_center(std::size_t frame) const {
  const double step = num_frames > 1 ? arc_span / static_cast<double>(num_frames - 1) : 0.0;
  const double a = arc_start + step * static_cast<double>(frame);
  return {arc_center.x() + arc_radius * std::cos(a), arc_center.y() + arc_radius * std::sin(a),
          camera_height};
}

RoomHit intersect_room(const Vec3& room, const Vec3& origin, const Vec3& direction) {
  RoomHit hit{std::numeric_limits<double>::infinity(), -1};
  for (int axis = 0; axis < 3; ++axis) {
    const double d = direction[axis];
    if (d == 0.0) continue;
    const double wall = d > 0.0 ? room[axis] : 0.0;
    const double t = (wall - origin[axis]) / d;
    if (t > 0.0 && t < hit.t) hit = {t, 2 * axis + (d > 0.0 ? 1 : 0)};
  }
  if (hit.face < 0) throw Error("intersect_room: ray does not hit the room");
  return hit;
}

Vec3 room_texture(const SyntheticSceneSpec& spec, std::uint64_t seed, int face, const Vec3& point) {
  const Vec2 uv = face_coords(face, point);
  const auto cell = [&](double size, std::uint64_t salt) {
    return hash_cell(seed, face, static_cast<std::int64_t>(std::floor(uv.x() / size)),
                     static_cast<std::int64_t>(std::floor(uv.y() / size)), salt);
  };
  const std::uint64_t base = cell(spec.cell_size, 1);
  const double fine = 1.0 + spec.noise_amplitude * (2.0 * unit(cell(spec.noise_cell_size, 2)) - 1.0);
  Vec3 rgb;
  for (int c = 0; c < 3; ++c) {
    const double v = 0.1 + 0.8 * unit(mix(base + static_cast<std::uint64_t>(c)));
    rgb[c] = std::clamp(v * fine, 0.0, 1.0);
  }
  return rgb;
}

SceneDataset generate_synthetic_scene(const SyntheticSceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::uint64_t tex_seed = mix(seed ^ mix(spec.texture_seed));
  const std::size_t w = spec.width, h = spec.height;
  const std::size_t ss = spec.supersample;
  const auto ssd = static_cast<double>(ss);
  SceneDataset ds;
  ds.frames.reserve(spec.num_frames);
  for (std::size_t i = 0; i < spec.num_frames; ++i) {
    const Vec3 center = spec.camera_center(i);
    const Pose pose = Pose::look_at(center, spec.look_at);
    const geometry::Mat3 rt = pose.rotation.transpose();
    RgbImage img{w, h, std::vector<std::uint8_t>(3 * w * h)};
    DepthMap depth{w, h, std::vector<double>(w * h)};
    for (std::size_t v = 0; v < h; ++v)
      for (std::size_t u = 0; u < w; ++u) {
        const Vec3 ray = spec.intrinsics.ray(Vec2(static_cast<double>(u), static_cast<double>(v)));
        // Unit-z camera ray, so the hit parameter is the z-depth.
        const RoomHit hit = intersect_room(spec.room, center, rt * ray);
        Vec3 rgb = Vec3::Zero();
        for (std::size_t sy = 0; sy < ss; ++sy)
          for (std::size_t sx = 0; sx < ss; ++sx) {
            const Vec2 sub(static_cast<double>(u) + (static_cast<double>(sx) + 0.5) / ssd - 0.5,
                           static_cast<double>(v) + (static_cast<double>(sy) + 0.5) / ssd - 0.5);
            const Vec3 dir = rt * spec.intrinsics.ray(sub);
            const RoomHit sh = intersect_room(spec.room, center, dir);
            rgb += room_texture(spec, tex_seed, sh.face, center + sh.t * dir);
          }
        rgb /= ssd * ssd;
        for (int c = 0; c < 3; ++c)
          img.pixels[3 * (v * w + u) + static_cast<std::size_t>(c)] =
              static_cast<std::uint8_t>(std::lround(rgb[c] * 255.0));
        depth.values[v * w + u] = hit.t;
      }
    ds.frames.push_back(
        make_frame(i, i % 2 == 0 ? Split::train : Split::test, img, std::move(depth), pose,
                   spec.intrinsics));
  }
  return ds;
}

}  // namespace ascore::data
