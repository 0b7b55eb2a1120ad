// SPDX-License-Identifier: Apache-2.0
#include "streamrecon/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "streamrecon/error.hpp"
#include "streamrecon/numerics.hpp"

namespace sr {

namespace {

constexpr double kRayEpsilon = 1e-9;
constexpr double kShellSlack = 1e-9;

Vec3 random_color(Rng& rng) {
  return Vec3(rng.uniform(0.25, 0.95), rng.uniform(0.25, 0.95), rng.uniform(0.25, 0.95));
}

Primitive shell_plane(int axis, double coord, const Vec3& lo, const Vec3& hi, Rng& rng) {
  Primitive p;
  p.kind = PrimitiveKind::kPlane;
  p.normal_axis = axis;
  p.center = 0.5 * (lo + hi);
  p.center[axis] = coord;
  p.half_extent = 0.5 * (hi - lo) + Vec3::Constant(kShellSlack);
  p.half_extent[axis] = 0.0;
  p.color = random_color(rng);
  p.checker = rng.uniform(0.25, 0.6);
  p.texture_seed = rng.next_u64();
  p.shell = true;
  return p;
}

// Integer hash for procedural value noise.
std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

double cell_noise(std::uint64_t seed, std::int64_t a, std::int64_t b, std::int64_t c) {
  std::uint64_t h = mix(seed ^ mix(static_cast<std::uint64_t>(a) * 0x9e3779b97f4a7c15ULL));
  h = mix(h ^ static_cast<std::uint64_t>(b) * 0xbf58476d1ce4e5b9ULL);
  h = mix(h ^ static_cast<std::uint64_t>(c) * 0x94d049bb133111ebULL);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

Vec3 shade(const Primitive& prim, const Vec3& hit, const Vec3& normal) {
  const double c = prim.checker;
  const auto fx = static_cast<std::int64_t>(std::floor(hit.x() / c));
  const auto fy = static_cast<std::int64_t>(std::floor(hit.y() / c));
  const auto fz = static_cast<std::int64_t>(std::floor(hit.z() / c));
  std::int64_t parity = 0;
  if (prim.kind == PrimitiveKind::kPlane) {
    const std::int64_t cells[3] = {fx, fy, fz};
    for (int a = 0; a < 3; ++a) {
      if (a != prim.normal_axis) parity += cells[a];
    }
  } else {
    parity = fx + fy + fz;
  }
  const double checker = (parity & 1) != 0 ? 0.6 : 1.0;
  const double noise = 0.85 + 0.15 * cell_noise(prim.texture_seed, fx, fy, fz);
  const Vec3 light = Vec3(0.3, 1.0, 0.2).normalized();
  const double lambert = 0.35 + 0.65 * std::max(0.0, normal.dot(light));
  return (checker * noise * lambert * prim.color).cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace

Scene make_scene(std::uint64_t seed, const SceneSpec& spec) {
  require(spec.room.minCoeff() > 0.0, ErrorKind::kInvalidConfig, "room extent must be positive");
  Rng rng(seed);
  Scene scene;
  scene.seed = seed;
  scene.free_radius = spec.free_radius;
  scene.bounds_min = Vec3(-0.5 * spec.room.x(), 0.0, -0.5 * spec.room.z());
  scene.bounds_max = Vec3(0.5 * spec.room.x(), spec.room.y(), 0.5 * spec.room.z());
  const Vec3& lo = scene.bounds_min;
  const Vec3& hi = scene.bounds_max;

  scene.primitives.push_back(shell_plane(1, lo.y(), lo, hi, rng));  // floor
  scene.primitives.push_back(shell_plane(1, hi.y(), lo, hi, rng));  // ceiling
  scene.primitives.push_back(shell_plane(0, lo.x(), lo, hi, rng));
  scene.primitives.push_back(shell_plane(0, hi.x(), lo, hi, rng));
  scene.primitives.push_back(shell_plane(2, lo.z(), lo, hi, rng));
  scene.primitives.push_back(shell_plane(2, hi.z(), lo, hi, rng));

  const double half_span = 0.5 * std::min(spec.room.x(), spec.room.z());
  // Places an object of horizontal radius `r` in the ring between the free
  // zone and the walls.
  auto ring_position = [&](double r) {
    const double inner = spec.free_radius + r + 0.1;
    const double outer = std::max(inner, half_span - r - 0.05);
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double dist = rng.uniform(inner, outer);
    return Vec3(dist * std::cos(theta), 0.0, dist * std::sin(theta));
  };

  for (std::size_t i = 0; i < spec.spheres; ++i) {
    Primitive p;
    p.kind = PrimitiveKind::kSphere;
    p.radius = rng.uniform(0.2, 0.5);
    p.center = ring_position(p.radius);
    const double top = std::max(p.radius, std::min(spec.room.y() - p.radius, 1.6));
    p.center.y() = rng.uniform(p.radius, top);
    p.color = random_color(rng);
    p.checker = rng.uniform(0.08, 0.2);
    p.texture_seed = rng.next_u64();
    scene.primitives.push_back(p);
  }
  for (std::size_t i = 0; i < spec.panels; ++i) {
    Primitive p;
    p.kind = PrimitiveKind::kPlane;
    p.normal_axis = rng.uniform() < 0.5 ? 0 : 2;
    const double width = rng.uniform(0.3, 0.6);
    const double height = rng.uniform(0.3, std::min(0.8, 0.5 * spec.room.y()));
    p.center = ring_position(width);
    p.center.y() = height + rng.uniform(0.0, 0.3);
    p.half_extent = Vec3::Zero();
    p.half_extent.y() = height;
    p.half_extent[p.normal_axis == 0 ? 2 : 0] = width;
    p.color = random_color(rng);
    p.checker = rng.uniform(0.1, 0.25);
    p.texture_seed = rng.next_u64();
    scene.primitives.push_back(p);
  }
  return scene;
}

RayHit cast_ray(const Scene& scene, const Vec3& origin, const Vec3& dir) {
  RayHit best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const Primitive& p = scene.primitives[i];
    double t = -1.0;
    Vec3 normal;
    if (p.kind == PrimitiveKind::kPlane) {
      const int a = p.normal_axis;
      if (std::abs(dir[a]) < 1e-15) continue;
      t = (p.center[a] - origin[a]) / dir[a];
      if (!(t > kRayEpsilon)) continue;
      const Vec3 hit = origin + t * dir;
      bool inside = true;
      for (int b = 0; b < 3; ++b) {
        if (b != a && std::abs(hit[b] - p.center[b]) > p.half_extent[b]) inside = false;
      }
      if (!inside) continue;
      normal = Vec3::Zero();
      normal[a] = dir[a] > 0.0 ? -1.0 : 1.0;
    } else {
      const Vec3 oc = origin - p.center;
      const double qa = dir.squaredNorm();
      const double qb = 2.0 * dir.dot(oc);
      const double qc = oc.squaredNorm() - p.radius * p.radius;
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc < 0.0) continue;
      const double root = std::sqrt(disc);
      const double t0 = (-qb - root) / (2.0 * qa);
      const double t1 = (-qb + root) / (2.0 * qa);
      t = t0 > kRayEpsilon ? t0 : t1;
      if (!(t > kRayEpsilon)) continue;
      normal = (origin + t * dir - p.center).normalized();
      if (normal.dot(dir) > 0.0) normal = -normal;
    }
    if (t < best.distance) {
      best.distance = t;
      best.primitive = i;
      best.normal = normal;
      best.hit = true;
    }
  }
  return best;
}

Intrinsics make_intrinsics(std::size_t h, std::size_t w, double hfov_deg) {
  Intrinsics k;
  const double half = 0.5 * hfov_deg * std::numbers::pi / 180.0;
  k.fx = 0.5 * static_cast<double>(w) / std::tan(half);
  k.fy = k.fx;
  k.cx = 0.5 * static_cast<double>(w);
  k.cy = 0.5 * static_cast<double>(h);
  return k;
}

FrameTruth render_frame(const Scene& scene, const Pose& pose, const Intrinsics& k, std::size_t h,
                        std::size_t w, const Pose& anchor) {
  FrameTruth out;
  out.image = Image(h, w);
  out.pm_cam = Pointmap(h, w);
  out.pm_world = Pointmap(h, w);
  const Mat3 anchor_rt = anchor.R.transpose();
  for (std::size_t v = 0; v < h; ++v) {
    for (std::size_t u = 0; u < w; ++u) {
      const Vec3 ray_cam((static_cast<double>(u) - k.cx) / k.fx,
                         (static_cast<double>(v) - k.cy) / k.fy, 1.0);
      const RayHit hit = cast_ray(scene, pose.t, pose.R * ray_cam);
      const std::size_t i = out.pm_cam.index(v, u);
      if (!hit.hit) {
        out.pm_cam.confidence[i] = 0.0;
        out.pm_world.confidence[i] = 0.0;
        continue;
      }
      const Vec3 p_cam = hit.distance * ray_cam;
      out.pm_cam.points[i] = p_cam;
      out.pm_world.points[i] = anchor_rt * ((pose.R * p_cam + pose.t) - anchor.t);
      const Vec3 world_hit = pose.t + hit.distance * (pose.R * ray_cam);
      const Vec3 color = shade(scene.primitives[hit.primitive], world_hit, hit.normal);
      for (std::size_t c = 0; c < 3; ++c) out.image.at(v, u, c) = color[static_cast<int>(c)];
    }
  }
  return out;
}

TrajectoryKind parse_trajectory_kind(std::string_view name) {
  if (name == "orbit") return TrajectoryKind::kOrbit;
  if (name == "walk") return TrajectoryKind::kWalk;
  fail(ErrorKind::kInvalidInput, "unknown trajectory kind '" + std::string(name) + "'");
}

std::string_view to_string(TrajectoryKind kind) {
  return kind == TrajectoryKind::kOrbit ? "orbit" : "walk";
}

Pose look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(Vec3::UnitY());
  require(right.norm() > 1e-9, ErrorKind::kDegenerate, "look_at direction is vertical");
  right.normalize();
  const Vec3 down = forward.cross(right);
  Pose p;
  p.R.col(0) = right;
  p.R.col(1) = down;
  p.R.col(2) = forward;
  p.t = eye;
  return p;
}

Trajectory make_trajectory(const Scene& scene, TrajectoryKind kind, std::size_t n_frames,
                           std::uint64_t seed, const TrajectorySpec& spec) {
  require(n_frames >= 1, ErrorKind::kInvalidInput, "trajectory needs at least one frame");
  Trajectory traj;
  traj.poses.reserve(n_frames);
  const Vec3 c = scene.center();
  const Vec3 hub(c.x(), spec.eye_height, c.z());

  if (kind == TrajectoryKind::kOrbit) {
    for (std::size_t k = 0; k < n_frames; ++k) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(k) /
                           static_cast<double>(n_frames);
      const Vec3 eye = hub + spec.orbit_radius * Vec3(std::cos(theta), 0.0, std::sin(theta));
      traj.poses.push_back(look_at(eye, hub));
    }
    return traj;
  }

  Rng rng(seed);
  const double max_turn = spec.max_turn_deg * std::numbers::pi / 180.0;
  const double limit = std::max(0.0, scene.free_radius - 0.3);
  double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double turn_rate = 0.0;
  Vec3 pos = hub;
  auto inside = [&](const Vec3& p) {
    return std::hypot(p.x() - hub.x(), p.z() - hub.z()) <= limit;
  };
  for (std::size_t k = 0; k < n_frames; ++k) {
    if (k > 0) {
      turn_rate = std::clamp(0.8 * turn_rate + 0.2 * rng.uniform(-max_turn, max_turn) * 3.0,
                             -max_turn, max_turn);
      heading += turn_rate;
      const double step = spec.step_bound * rng.uniform(0.6, 1.0);
      Vec3 next = pos + step * Vec3(std::cos(heading), 0.0, std::sin(heading));
      // Steer back toward the hub until the step stays in the free zone.
      const double to_hub = std::atan2(hub.z() - pos.z(), hub.x() - pos.x());
      double delta = std::remainder(to_hub - heading, 2.0 * std::numbers::pi);
      for (int tries = 0; !inside(next) && tries < 180; ++tries) {
        const double turn = std::copysign(std::min(max_turn, std::abs(delta)), delta);
        heading += turn;
        delta -= turn;
        next = pos + step * Vec3(std::cos(heading), 0.0, std::sin(heading));
      }
      if (inside(next)) pos = next;
    }
    const Vec3 target = pos + Vec3(std::cos(heading), -0.18, std::sin(heading));
    traj.poses.push_back(look_at(pos, target));
  }
  return traj;
}

Trajectory relative_to_first(const Trajectory& traj) {
  Trajectory out = traj;
  if (traj.poses.empty()) return out;
  const Pose inv = traj.poses.front().inverse();
  for (auto& p : out.poses) p = inv * p;
  out.poses.front() = Pose{};
  return out;
}

CurriculumStage parse_curriculum_stage(std::string_view name) {
  if (name == "1") return CurriculumStage::kStage1;
  if (name == "2a") return CurriculumStage::kStage2a;
  if (name == "2b") return CurriculumStage::kStage2b;
  fail(ErrorKind::kInvalidInput, "unknown curriculum stage '" + std::string(name) + "'");
}

std::size_t curriculum_length(CurriculumStage stage) {
  switch (stage) {
    case CurriculumStage::kStage1: return 5;
    case CurriculumStage::kStage2a: return 10;
    case CurriculumStage::kStage2b: return 32;
  }
  return 0;
}

std::vector<std::size_t> curriculum_sample(std::size_t n_total, CurriculumStage stage,
                                           std::uint64_t seed) {
  const std::size_t k = curriculum_length(stage);
  require(n_total >= k, ErrorKind::kInvalidInput,
          "sequence of " + std::to_string(n_total) + " frames is shorter than " +
              std::to_string(k));
  std::vector<std::size_t> idx(n_total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n_total - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace sr
