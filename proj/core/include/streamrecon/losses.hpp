// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "streamrecon/geometry.hpp"

namespace sr {

inline constexpr double kDefaultConfidenceAlpha = 0.2;

struct LossTerm {
  double value = 0.0;
  std::vector<Vec3> grad_points;     // d value / d predicted point
  std::vector<double> grad_confidence;  // empty for the scale term
  std::vector<double> residuals;        // per-point residual norm, conf term only
};

/// Valid masks are one byte per point, nonzero = valid.

/// Confidence-weighted regression:
///   mean_valid [ C_i * || x_hat_i / z_hat - x_i / z || - alpha * log C_i ]
/// with z_hat, z the mean distance of valid predicted / ground-truth points
/// from the origin when `normalize` is set, 1 otherwise.
LossTerm conf_loss(std::span<const Vec3> pred, std::span<const double> confidence,
                   std::span<const Vec3> gt, std::span<const std::uint8_t> valid, double alpha,
                   bool normalize);

/// Hinge on the mean point distance from the origin:
///   max(0, s(pred) - s(gt)),  s(X) = mean_valid ||X_i||.
/// The subgradient at the hinge is zero.
LossTerm scale_loss(std::span<const Vec3> pred, std::span<const Vec3> gt,
                    std::span<const std::uint8_t> valid);

/// Mean distance from the origin over valid points.
double mean_norm(std::span<const Vec3> pts, std::span<const std::uint8_t> valid);

struct LossReport {
  double conf_loss = 0.0;
  double scale_loss = 0.0;
  double total = 0.0;
  std::vector<double> residuals;  // || x_hat_i / z_hat - x_i / z ||, 0 for invalid pixels
  std::vector<Vec3> grad_points;
  std::vector<double> grad_confidence;
};

LossReport total_loss(std::span<const Vec3> pred, std::span<const double> confidence,
                      std::span<const Vec3> gt, std::span<const std::uint8_t> valid,
                      double alpha = kDefaultConfidenceAlpha, bool normalize = true);

}  // namespace sr
