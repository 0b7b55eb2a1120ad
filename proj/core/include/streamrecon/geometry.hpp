// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace sr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// H x W x 3 intensities in [0, 1], row-major with interleaved channels.
struct Image {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<double> data;

  Image() = default;
  Image(std::size_t height, std::size_t width) : h(height), w(width), data(height * width * 3, 0.0) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) { return data[(y * w + x) * 3 + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return data[(y * w + x) * 3 + c]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Per-pixel 3D points with confidence. A confidence of zero marks a
/// masked pixel in ground-truth maps; predicted maps always carry
/// confidence > 1.
struct Pointmap {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<Vec3> points;
  std::vector<double> confidence;

  Pointmap() = default;
  Pointmap(std::size_t height, std::size_t width)
      : h(height), w(width), points(height * width, Vec3::Zero()), confidence(height * width, 1.0) {}

  std::size_t size() const { return h * w; }
  std::size_t index(std::size_t y, std::size_t x) const { return y * w + x; }
  const Vec3& at(std::size_t y, std::size_t x) const { return points[y * w + x]; }
  Vec3& at(std::size_t y, std::size_t x) { return points[y * w + x]; }
  bool valid(std::size_t i) const { return confidence[i] > 0.0; }
};

/// Rigid camera-to-world transform: x_world = R * x_cam + t.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return R * p + t; }
  Pose inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
  Pose operator*(const Pose& o) const { return {R * o.R, R * o.t + t}; }
};

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

struct Trajectory {
  std::vector<Pose> poses;
  Intrinsics intrinsics;

  std::size_t size() const { return poses.size(); }
};

}  // namespace sr
