// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "streamrecon/geometry.hpp"

namespace sr {

enum class PrimitiveKind { kPlane, kSphere };

/// Textured scene element. Planes are axis-aligned rectangles: `normal_axis`
/// picks the constant coordinate, `center` and `half_extent` bound the
/// other two. Spheres use `center` and `radius`.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kPlane;
  Vec3 center = Vec3::Zero();
  Vec3 half_extent = Vec3::Zero();
  int normal_axis = 0;
  double radius = 0.0;
  Vec3 color = Vec3::Ones();
  double checker = 0.5;  // checkerboard cell size in scene units
  std::uint64_t texture_seed = 0;
  bool shell = false;  // part of the enclosing room
};

struct SceneSpec {
  std::size_t spheres = 4;
  std::size_t panels = 3;
  Vec3 room = Vec3(6.0, 3.0, 6.0);  // x (width), y (height, up), z (depth)
  /// Radius around the room centre (in x-z) kept free of primitives so
  /// cameras can move without collisions.
  double free_radius = 1.5;
};

/// Closed box room spanning [-room/2, room/2] in x and z and [0, room.y] in y.
struct Scene {
  std::vector<Primitive> primitives;
  Vec3 bounds_min = Vec3::Zero();
  Vec3 bounds_max = Vec3::Zero();
  double free_radius = 0.0;
  std::uint64_t seed = 0;

  Vec3 center() const { return 0.5 * (bounds_min + bounds_max); }
};

Scene make_scene(std::uint64_t seed, const SceneSpec& spec = {});

struct RayHit {
  double distance = 0.0;  // along the (unnormalized) ray direction
  std::size_t primitive = 0;
  Vec3 normal = Vec3::Zero();
  bool hit = false;
};

/// Nearest intersection with t > 1e-9, or hit = false.
RayHit cast_ray(const Scene& scene, const Vec3& origin, const Vec3& dir);

/// Pinhole intrinsics with the principal point at (W/2, H/2) and the given
/// horizontal field of view.
Intrinsics make_intrinsics(std::size_t h, std::size_t w, double hfov_deg = 60.0);

struct FrameTruth {
  Image image;
  Pointmap pm_cam;    // camera coordinates, confidence 1 (0 where masked)
  Pointmap pm_world;  // same points in the anchor (first) camera's frame
};

/// Ray-casts one frame. Camera convention: +z forward, +x right, +y down.
/// `anchor` is the first camera pose; pm_world = anchor^-1 * pose * pm_cam.
FrameTruth render_frame(const Scene& scene, const Pose& pose, const Intrinsics& k, std::size_t h,
                        std::size_t w, const Pose& anchor = Pose{});

enum class TrajectoryKind { kOrbit, kWalk };

TrajectoryKind parse_trajectory_kind(std::string_view name);
std::string_view to_string(TrajectoryKind kind);

struct TrajectorySpec {
  double step_bound = 0.08;  // max camera-centre displacement per frame
  double eye_height = 1.4;
  double orbit_radius = 1.0;
  double max_turn_deg = 4.0;  // walk heading change per frame
};

/// Camera-to-world poses in scene coordinates. Orbit cameras sit on a circle
/// about the vertical axis through the room centre and look inward; a walk
/// is a seeded smooth random walk inside the free zone.
Trajectory make_trajectory(const Scene& scene, TrajectoryKind kind, std::size_t n_frames,
                           std::uint64_t seed, const TrajectorySpec& spec = {});

/// Poses re-expressed relative to the first pose, which becomes identity.
Trajectory relative_to_first(const Trajectory& traj);

/// Camera pose looking from `eye` toward `target` with world +y up.
Pose look_at(const Vec3& eye, const Vec3& target);

enum class CurriculumStage { kStage1, kStage2a, kStage2b };

CurriculumStage parse_curriculum_stage(std::string_view name);
/// Frames drawn per sequence at each stage: 5, 10, 32.
std::size_t curriculum_length(CurriculumStage stage);

/// Sorted distinct frame indices in [0, n_total), uniform without
/// replacement. Throws kInvalidInput when the sequence is too short.
std::vector<std::size_t> curriculum_sample(std::size_t n_total, CurriculumStage stage,
                                           std::uint64_t seed);

}  // namespace sr
