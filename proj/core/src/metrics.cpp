// SPDX-License-Identifier: Apache-2.0
#include "streamrecon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "streamrecon/error.hpp"

namespace sr {

namespace {

constexpr std::size_t kLeafSize = 8;
constexpr double kRankTolerance = 1e-12;

}  // namespace

Sim3 umeyama(std::span<const Vec3> src, std::span<const Vec3> dst, bool with_scale) {
  std::vector<double> w(src.size(), 1.0);
  return umeyama_weighted(src, dst, w, with_scale);
}

Sim3 umeyama_weighted(std::span<const Vec3> src, std::span<const Vec3> dst,
                      std::span<const double> weights, bool with_scale) {
  require(src.size() == dst.size() && src.size() == weights.size(), ErrorKind::kShape,
          "alignment inputs differ in length");
  require(src.size() >= 3, ErrorKind::kDegenerate, "alignment needs at least 3 points");
  double total = 0.0;
  for (double w : weights) {
    require(w >= 0.0 && std::isfinite(w), ErrorKind::kInvalidInput,
            "alignment weights must be finite and non-negative");
    total += w;
  }
  require(total > 0.0, ErrorKind::kDegenerate, "alignment weights sum to zero");

  Vec3 mu_src = Vec3::Zero();
  Vec3 mu_dst = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_src += weights[i] * src[i];
    mu_dst += weights[i] * dst[i];
  }
  mu_src /= total;
  mu_dst /= total;

  Mat3 cross = Mat3::Zero();
  Mat3 scatter = Mat3::Zero();
  double var_src = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - mu_src;
    const Vec3 b = dst[i] - mu_dst;
    cross += weights[i] * b * a.transpose();
    scatter += weights[i] * a * a.transpose();
    var_src += weights[i] * a.squaredNorm();
  }
  cross /= total;
  scatter /= total;
  var_src /= total;

  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const Vec3 ev = eig.eigenvalues();  // ascending
  require(ev(2) > 0.0 && ev(1) > kRankTolerance * ev(2), ErrorKind::kDegenerate,
          "source points are collinear or coincident");

  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  require(sv(0) > 0.0 && sv(1) > kRankTolerance * sv(0), ErrorKind::kDegenerate,
          "cross-covariance has rank < 2");
  Mat3 S = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) S(2, 2) = -1.0;

  Sim3 out;
  out.R = svd.matrixU() * S * svd.matrixV().transpose();
  out.s = with_scale ? (sv.asDiagonal() * S).trace() / var_src : 1.0;
  out.t = mu_dst - out.s * (out.R * mu_src);
  return out;
}

NearestNeighbors::NearestNeighbors(std::span<const Vec3> cloud)
    : points_(cloud.begin(), cloud.end()), order_(cloud.size()) {
  require(!points_.empty(), ErrorKind::kInvalidInput, "nearest-neighbour cloud is empty");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  build(0, points_.size());
}

std::size_t NearestNeighbors::build(std::size_t begin, std::size_t end) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  const std::size_t id = nodes_.size();
  nodes_.push_back({begin, end, -1, 0.0, 0, 0, lo, hi});
  if (end - begin <= kLeafSize) return id;

  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::size_t mid = begin + (end - begin) / 2;
  auto first = order_.begin() + static_cast<std::ptrdiff_t>(begin);
  std::nth_element(first, order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
  const double split = points_[order_[mid]][axis];
  const std::size_t left = build(begin, mid);
  const std::size_t right = build(mid, end);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void NearestNeighbors::search(std::size_t node, const Vec3& q, std::size_t& best,
                              double& best_sq) const {
  const Node& n = nodes_[node];
  // Box distance is a lower bound up to rounding; the relative margin keeps
  // equal-distance candidates (and hence the smallest-index tie rule) in play.
  double box_sq = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double d = std::max({n.lo[a] - q[a], 0.0, q[a] - n.hi[a]});
    box_sq += d * d;
  }
  if (box_sq > best_sq * (1.0 + 1e-9)) return;
  if (n.axis < 0) {
    for (std::size_t i = n.begin; i < n.end; ++i) {
      const std::size_t idx = order_[i];
      const double d = (points_[idx] - q).squaredNorm();
      if (d < best_sq || (d == best_sq && idx < best)) {
        best_sq = d;
        best = idx;
      }
    }
    return;
  }
  // Left holds coordinates <= split, right holds >= split.
  const double diff = q[n.axis] - n.split;
  const std::size_t near_child = diff <= 0.0 ? n.left : n.right;
  const std::size_t far_child = diff <= 0.0 ? n.right : n.left;
  search(near_child, q, best, best_sq);
  search(far_child, q, best, best_sq);
}

std::size_t NearestNeighbors::nearest(const Vec3& q) const {
  std::size_t best = std::numeric_limits<std::size_t>::max();
  double best_sq = std::numeric_limits<double>::infinity();
  search(0, q, best, best_sq);
  return best;
}

double NearestNeighbors::nearest_distance(const Vec3& q) const {
  return (points_[nearest(q)] - q).norm();
}

DistanceStats summarize(std::vector<double> values) {
  require(!values.empty(), ErrorKind::kInvalidInput, "cannot summarize an empty set");
  DistanceStats s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  s.median = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return s;
}

std::vector<double> nearest_distances(std::span<const Vec3> from, std::span<const Vec3> to) {
  require(!from.empty() && !to.empty(), ErrorKind::kInvalidInput, "empty point cloud");
  const NearestNeighbors index(to);
  std::vector<double> out;
  out.reserve(from.size());
  for (const Vec3& p : from) out.push_back(index.nearest_distance(p));
  return out;
}

CloudDistance cloud_distance(std::span<const Vec3> pred, std::span<const Vec3> gt) {
  require(!pred.empty() && !gt.empty(), ErrorKind::kInvalidInput, "empty point cloud");
  return {summarize(nearest_distances(pred, gt)), summarize(nearest_distances(gt, pred))};
}

std::optional<Vec3> pixel_normal(const Pointmap& pm, std::size_t y, std::size_t x) {
  if (y == 0 || x == 0 || y + 1 >= pm.h || x + 1 >= pm.w) return std::nullopt;
  const std::size_t c = pm.index(y, x);
  const std::size_t l = pm.index(y, x - 1), r = pm.index(y, x + 1);
  const std::size_t u = pm.index(y - 1, x), d = pm.index(y + 1, x);
  for (std::size_t i : {c, l, r, u, d}) {
    if (!pm.valid(i)) return std::nullopt;
  }
  const Vec3 n = (pm.points[r] - pm.points[l]).cross(pm.points[d] - pm.points[u]);
  const double len = n.norm();
  if (!(len > 0.0) || !std::isfinite(len)) return std::nullopt;
  return n / len;
}

std::vector<double> normal_scores(const Pointmap& pred, const Pointmap& gt) {
  require(pred.h == gt.h && pred.w == gt.w, ErrorKind::kShape, "pointmap sizes differ");
  std::vector<Vec3> gt_points;
  std::vector<Vec3> gt_normals;
  for (std::size_t y = 0; y < gt.h; ++y) {
    for (std::size_t x = 0; x < gt.w; ++x) {
      if (auto n = pixel_normal(gt, y, x)) {
        gt_points.push_back(gt.at(y, x));
        gt_normals.push_back(*n);
      }
    }
  }
  require(!gt_points.empty(), ErrorKind::kInvalidInput, "ground truth has no valid normals");
  const NearestNeighbors index(gt_points);

  std::vector<double> scores;
  for (std::size_t y = 0; y < pred.h; ++y) {
    for (std::size_t x = 0; x < pred.w; ++x) {
      auto n = pixel_normal(pred, y, x);
      if (!n) continue;
      const Vec3& m = gt_normals[index.nearest(pred.at(y, x))];
      // Identical unit normals score exactly 1; the dot product may round
      // one ulp below.
      const double score = (*n == m || *n == -m) ? 1.0 : std::min(1.0, std::abs(n->dot(m)));
      scores.push_back(score);
    }
  }
  require(!scores.empty(), ErrorKind::kInvalidInput, "prediction has no valid normals");
  return scores;
}

DistanceStats normal_consistency(const Pointmap& pred, const Pointmap& gt) {
  DistanceStats s = summarize(normal_scores(pred, gt));
  s.mean *= 100.0;
  s.median *= 100.0;
  return s;
}

ReconReport make_recon_report(const CloudDistance& dist, std::vector<double> normal_scores) {
  ReconReport r;
  r.acc_mean = 100.0 * dist.accuracy.mean;
  r.acc_median = 100.0 * dist.accuracy.median;
  r.comp_mean = 100.0 * dist.completion.mean;
  r.comp_median = 100.0 * dist.completion.median;
  const DistanceStats nc = summarize(std::move(normal_scores));
  r.nc_mean = 100.0 * nc.mean;
  r.nc_median = 100.0 * nc.median;
  return r;
}

double rotation_angle(const Mat3& R) {
  // atan2 form stays accurate near the identity, where acos loses half the
  // significant digits.
  const Vec3 axis(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const double sin_part = 0.5 * axis.norm();
  const double cos_part = 0.5 * (R.trace() - 1.0);
  return std::atan2(sin_part, cos_part);
}

PoseReport trajectory_errors(const Trajectory& pred, const Trajectory& gt) {
  require(pred.size() == gt.size(), ErrorKind::kShape, "trajectories differ in length");
  require(pred.size() >= 2, ErrorKind::kShape, "trajectory metrics need at least 2 frames");
  const std::size_t n = pred.size();
  std::vector<Vec3> src, dst;
  src.reserve(n);
  dst.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    src.push_back(pred.poses[i].t);
    dst.push_back(gt.poses[i].t);
  }
  const Sim3 align = umeyama(src, dst, true);

  std::vector<Pose> aligned(n);
  double ate_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    aligned[i].R = align.R * pred.poses[i].R;
    aligned[i].t = align.apply(pred.poses[i].t);
    ate_sq += (aligned[i].t - gt.poses[i].t).squaredNorm();
  }

  double rpe_t_sq = 0.0;
  double rpe_r_sq = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Pose rel_gt = gt.poses[i].inverse() * gt.poses[i + 1];
    const Pose rel_pred = aligned[i].inverse() * aligned[i + 1];
    const Pose err = rel_gt.inverse() * rel_pred;
    rpe_t_sq += err.t.squaredNorm();
    const double ang = rotation_angle(err.R);
    rpe_r_sq += ang * ang;
  }
  const double pairs = static_cast<double>(n - 1);
  PoseReport r;
  r.ate = 100.0 * std::sqrt(ate_sq / static_cast<double>(n));
  r.rpe_t = 100.0 * std::sqrt(rpe_t_sq / pairs);
  r.rpe_r = std::sqrt(rpe_r_sq / pairs) * 180.0 / std::numbers::pi;
  return r;
}

PoseEstimate extract_pose(const Pointmap& pred_global, const Pointmap& cam_local) {
  require(pred_global.h == cam_local.h && pred_global.w == cam_local.w, ErrorKind::kShape,
          "pointmap sizes differ");
  std::vector<Vec3> src, dst;
  std::vector<double> w;
  for (std::size_t i = 0; i < pred_global.size(); ++i) {
    if (!pred_global.valid(i) || !cam_local.valid(i)) continue;
    src.push_back(cam_local.points[i]);
    dst.push_back(pred_global.points[i]);
    w.push_back(pred_global.confidence[i] * cam_local.confidence[i]);
  }
  const Sim3 sim = umeyama_weighted(src, dst, w, true);
  return {Pose{sim.R, sim.t}, sim.s};
}

}  // namespace sr
