// SPDX-License-Identifier: Apache-2.0
#include "streamrecon/losses.hpp"

#include <cmath>

#include "streamrecon/error.hpp"

namespace sr {

namespace {

std::size_t count_valid(std::span<const std::uint8_t> valid) {
  std::size_t n = 0;
  for (auto v : valid) n += v != 0 ? 1 : 0;
  return n;
}

}  // namespace

double mean_norm(std::span<const Vec3> pts, std::span<const std::uint8_t> valid) {
  require(pts.size() == valid.size(), ErrorKind::kShape, "points and mask differ in length");
  const std::size_t n = count_valid(valid);
  require(n > 0, ErrorKind::kInvalidInput, "no valid points");
  double sum = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (valid[i]) sum += pts[i].norm();
  }
  return sum / static_cast<double>(n);
}

LossTerm conf_loss(std::span<const Vec3> pred, std::span<const double> confidence,
                   std::span<const Vec3> gt, std::span<const std::uint8_t> valid, double alpha,
                   bool normalize) {
  const std::size_t n = pred.size();
  require(confidence.size() == n && gt.size() == n && valid.size() == n, ErrorKind::kShape,
          "conf_loss inputs differ in length");
  require(alpha >= 0.0, ErrorKind::kInvalidConfig, "alpha must be >= 0");
  const std::size_t nv = count_valid(valid);
  require(nv > 0, ErrorKind::kInvalidInput, "conf_loss has no valid pixels");
  const double inv_n = 1.0 / static_cast<double>(nv);

  double z_pred = 1.0;
  double z_gt = 1.0;
  if (normalize) {
    z_pred = mean_norm(pred, valid);
    z_gt = mean_norm(gt, valid);
    require(z_pred > 0.0 && z_gt > 0.0, ErrorKind::kDegenerate,
            "normalization needs points away from the origin");
  }

  LossTerm out;
  out.grad_points.assign(n, Vec3::Zero());
  out.grad_confidence.assign(n, 0.0);
  out.residuals.assign(n, 0.0);

  // Accumulates sum_i C_i u_i . x_hat_i for the chain rule through z_pred.
  double through_norm = 0.0;
  std::vector<Vec3> unit(n, Vec3::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    require(confidence[i] > 0.0, ErrorKind::kInvalidInput, "confidence must be positive");
    const Vec3 r = pred[i] / z_pred - gt[i] / z_gt;
    const double e = r.norm();
    out.residuals[i] = e;
    out.value += confidence[i] * e - alpha * std::log(confidence[i]);
    out.grad_confidence[i] = (e - alpha / confidence[i]) * inv_n;
    if (e > 0.0) {
      unit[i] = r / e;
      out.grad_points[i] = confidence[i] * inv_n / z_pred * unit[i];
      through_norm += confidence[i] * unit[i].dot(pred[i]);
    }
  }
  out.value *= inv_n;

  if (normalize) {
    const double d_loss_d_z = -inv_n * through_norm / (z_pred * z_pred);
    for (std::size_t j = 0; j < n; ++j) {
      if (!valid[j]) continue;
      const double len = pred[j].norm();
      if (len > 0.0) out.grad_points[j] += d_loss_d_z * inv_n / len * pred[j];
    }
  }
  return out;
}

LossTerm scale_loss(std::span<const Vec3> pred, std::span<const Vec3> gt,
                    std::span<const std::uint8_t> valid) {
  const std::size_t n = pred.size();
  require(gt.size() == n && valid.size() == n, ErrorKind::kShape,
          "scale_loss inputs differ in length");
  require(count_valid(valid) > 0, ErrorKind::kInvalidInput, "scale_loss has no valid points");
  const double gap = mean_norm(pred, valid) - mean_norm(gt, valid);

  LossTerm out;
  out.grad_points.assign(n, Vec3::Zero());
  if (gap <= 0.0) return out;
  out.value = gap;
  const double inv_n = 1.0 / static_cast<double>(count_valid(valid));
  for (std::size_t i = 0; i < n; ++i) {
    const double len = pred[i].norm();
    if (valid[i] && len > 0.0) out.grad_points[i] = inv_n / len * pred[i];
  }
  return out;
}

LossReport total_loss(std::span<const Vec3> pred, std::span<const double> confidence,
                      std::span<const Vec3> gt, std::span<const std::uint8_t> valid, double alpha,
                      bool normalize) {
  LossTerm conf = conf_loss(pred, confidence, gt, valid, alpha, normalize);
  LossTerm scale = scale_loss(pred, gt, valid);
  LossReport report;
  report.conf_loss = conf.value;
  report.scale_loss = scale.value;
  report.total = conf.value + scale.value;
  report.residuals = std::move(conf.residuals);
  report.grad_points = std::move(conf.grad_points);
  for (std::size_t i = 0; i < report.grad_points.size(); ++i) {
    report.grad_points[i] += scale.grad_points[i];
  }
  report.grad_confidence = std::move(conf.grad_confidence);
  return report;
}

}  // namespace sr
