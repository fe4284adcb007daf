#pragma once

#include <cstdint>

#include "ascore/data/scene.hpp"

namespace ascore::data {

// Axis-aligned box room [0, room] with procedurally textured faces, viewed
// from cameras on a horizontal arc that all look at one target point.
struct SyntheticSceneSpec {
  geometry::Vec3 room = {4.0, 4.0, 2.5};
  std::uint64_t texture_seed = 0;
  double cell_size = 0.25;         // checker cell edge, meters
  double noise_cell_size = 0.05;   // fine texture cell edge, meters
  double noise_amplitude = 0.15;   // relative brightness variation of fine cells
  std::size_t num_frames = 20;
  geometry::Vec2 arc_center = {2.0, 2.0};
  double arc_radius = 1.0;
  double camera_height = 1.4;
  double arc_start = -2.356194490192345;  // radians
  double arc_span = 1.5707963267948966;  // radians covered from first to last frame
  geometry::Vec3 look_at = {2.0, 4.0, 1.0};
  std::size_t width = 160;
  std::size_t height = 160;
  CameraIntrinsics intrinsics = {140.0, 140.0, 79.5, 79.5};
  std::size_t supersample = 3;  // color samples per pixel along each axis

  // Throws ConfigError for non-positive sizes or a camera outside the room.
  void validate() const;
  geometry::Vec3 camera_center(std::size_t frame) const;
};

// Color and exact ray-cast depth for every frame. Color averages a
// supersample x supersample grid within each pixel and is quantized to 8 bits;
// depth is the pixel-center ray hit at full precision. Even frames train, odd frames test.
SceneDataset generate_synthetic_scene(const SyntheticSceneSpec& spec, std::uint64_t seed);

// Texture color (RGB in [0, 1]) at a point on face `face` of the room:
// 0/1 = x min/max, 2/3 = y min/max, 4/5 = z min/max.
geometry::Vec3 room_texture(const SyntheticSceneSpec& spec, std::uint64_t seed, int face,
                            const geometry::Vec3& point);

// First surface hit along world ray origin + t * direction from inside the room.
struct RoomHit {
  double t = 0.0;
  int face = 0;
};
RoomHit intersect_room(const geometry::Vec3& room, const geometry::Vec3& origin,
                       const geometry::Vec3& direction);

}  // namespace ascore::data
