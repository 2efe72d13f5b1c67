/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "lrenkf/lcsvd.hpp"
#include "lrenkf/snapshot.hpp"

namespace lrenkf {

/// ||V - V_rec||_F / ||V||_F. Throws ShapeError on mismatch, ValueError when V is zero.
double rrmse(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& estimate);
/// Same as above with the estimate kept in factored form.
double rrmse(const Eigen::MatrixXd& reference, const SVDFactors& estimate);

/// Mean absolute entrywise difference.
double mae(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& estimate);
double mae(const Eigen::MatrixXd& reference, const SVDFactors& estimate);

/// t_hr / t_lr. Both times must be positive.
double speedup(double t_hr, double t_lr);

/// (r_hr - r_lr) / r_hr; negative when the LR run needs more memory.
double ram_compression(double r_hr, double r_lr);

struct GridPoint {
  Index comp = 0;
  Index ix = 0;
  Index iy = 0;
  Index iz = 0;
};

/// Row of `snapshots` at `point`, in time order.
Eigen::VectorXd tracking_series(const SnapshotMatrix& snapshots, const GridPoint& point);

struct MetricsReport {
  std::string case_label;
  double noise_eta = 0.0;
  double c_r_ub = 1.0;
  double c_r_w = 1.0;
  double wall_time_s = 0.0;
  std::optional<double> speedup;
  double mae = 0.0;
  double rrmse = 0.0;
  std::size_t peak_bytes = 0;
  std::optional<double> ram_compression;
  /// MAE over the truth's global standard deviation; JSON only.
  std::optional<double> mae_pct;

  static std::string csv_header();
  std::string csv_row() const;
  /// Pretty-printed JSON object with the CSV field names.
  std::string json() const;
};

}  // namespace lrenkf
