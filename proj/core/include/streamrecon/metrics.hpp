// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "streamrecon/geometry.hpp"

namespace sr {

/// x -> s * R * x + t.
struct Sim3 {
  double s = 1.0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return s * (R * p) + t; }
};

/// Least-squares similarity (or rigid, when with_scale is false) mapping
/// src onto dst, SVD-based with reflection correction. Throws kDegenerate
/// for fewer than 3 points or a rank < 2 configuration.
Sim3 umeyama(std::span<const Vec3> src, std::span<const Vec3> dst, bool with_scale);

/// Weighted variant; weights must be non-negative with a positive sum.
Sim3 umeyama_weighted(std::span<const Vec3> src, std::span<const Vec3> dst,
                      std::span<const double> weights, bool with_scale);

/// Exact nearest-neighbour queries over a fixed cloud (k-d tree). Distances
/// are bit-identical to a brute-force scan using (a - b).norm().
class NearestNeighbors {
 public:
  explicit NearestNeighbors(std::span<const Vec3> cloud);

  std::size_t nearest(const Vec3& q) const;
  double nearest_distance(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    Vec3 lo = Vec3::Zero();  // bounding box of the node's points
    Vec3 hi = Vec3::Zero();
  };

  std::size_t build(std::size_t begin, std::size_t end);
  void search(std::size_t node, const Vec3& q, std::size_t& best, double& best_sq) const;

  std::vector<Vec3> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

struct DistanceStats {
  double mean = 0.0;
  double median = 0.0;
};

/// Mean and median (average of the middle pair for even counts).
DistanceStats summarize(std::vector<double> values);

/// Distance from each `from` point to its nearest `to` point.
std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to);

struct CloudDistance {
  DistanceStats accuracy;    // pred -> nearest gt
  DistanceStats completion;  // gt -> nearest pred
};

CloudDistance cloud_distance(std::span<const Vec3> pred, std::span<const Vec3> gt);

/// Central-difference normal at an interior pixel, or nothing when a
/// neighbour is masked or the cross product vanishes.
std::optional<Vec3> pixel_normal(const Pointmap& pm, std::size_t y, std::size_t x);

/// Per-pixel |n_pred . n_gt(nearest gt point)| in [0, 1] over interior
/// pixels with valid normals.
std::vector<double> normal_scores(const Pointmap& pred, const Pointmap& gt);

/// Mean and median of normal_scores, scaled by 100.
DistanceStats normal_consistency(const Pointmap& pred, const Pointmap& gt);

/// Accuracy/completion are scene units x 100 (centimetres for metric
/// scenes); normal consistency is in [0, 100].
struct ReconReport {
  double acc_mean = 0.0;
  double acc_median = 0.0;
  double comp_mean = 0.0;
  double comp_median = 0.0;
  double nc_mean = 0.0;
  double nc_median = 0.0;
};

ReconReport make_recon_report(const CloudDistance& dist, std::vector<double> normal_scores);

/// ate and rpe_t in scene units x 100, rpe_r in degrees; all RMSE.
struct PoseReport {
  double ate = 0.0;
  double rpe_t = 0.0;
  double rpe_r = 0.0;
};

/// Sim3-aligns predicted camera centres to ground truth, then reports ATE
/// and consecutive-frame RPE on the aligned trajectory.
PoseReport trajectory_errors(const Trajectory& pred, const Trajectory& gt);

/// Geodesic angle of a rotation in radians.
double rotation_angle(const Mat3& R);

struct PoseEstimate {
  Pose pose;
  double scale = 1.0;
};

/// Confidence-weighted similarity alignment of a camera-frame pointmap onto
/// the predicted global pointmap. Pixels masked in either map are skipped.
PoseEstimate extract_pose(const Pointmap& pred_global, const Pointmap& cam_local);

}  // namespace sr
