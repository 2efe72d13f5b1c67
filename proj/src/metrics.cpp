/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lrenkf/metrics.hpp"

#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lrenkf/error.hpp"

namespace lrenkf {

namespace {

void require_same_shape(Index ref_rows, Index ref_cols, Index rows, Index cols) {
  if (ref_rows != rows || ref_cols != cols)
    throw ShapeError(
        fmt::format("reference is {}x{}, estimate is {}x{}", ref_rows, ref_cols, rows, cols));
}

// Column-by-column accumulation of sum (ref - est)^2, sum ref^2 and sum |ref - est|.
// `column(k, buf)` fills the estimate's column k.
struct Sums {
  double diff_sq = 0.0;
  double ref_sq = 0.0;
  double abs_diff = 0.0;
};

template <typename ColumnFn>
Sums accumulate(const Eigen::MatrixXd& ref, ColumnFn&& column) {
  Sums s;
  Eigen::VectorXd est(ref.rows());
  for (Index k = 0; k < ref.cols(); ++k) {
    column(k, est);
    for (Index j = 0; j < ref.rows(); ++j) {
      const double r = ref(j, k);
      const double d = r - est(j);
      s.diff_sq += d * d;
      s.ref_sq += r * r;
      s.abs_diff += std::abs(d);
    }
  }
  return s;
}

Sums sums(const Eigen::MatrixXd& ref, const Eigen::MatrixXd& est) {
  require_same_shape(ref.rows(), ref.cols(), est.rows(), est.cols());
  return accumulate(ref, [&](Index k, Eigen::VectorXd& out) { out = est.col(k); });
}

Sums sums(const Eigen::MatrixXd& ref, const SVDFactors& est) {
  require_same_shape(ref.rows(), ref.cols(), est.rows(), est.cols());
  return accumulate(ref, [&](Index k, Eigen::VectorXd& out) { out = est.column(k); });
}

double ratio(const Sums& s) {
  if (s.ref_sq == 0.0) throw ValueError("rrmse reference has zero norm");
  return std::sqrt(s.diff_sq) / std::sqrt(s.ref_sq);
}

double mean_abs(const Sums& s, const Eigen::MatrixXd& ref) {
  if (ref.size() == 0) throw ShapeError("mae of an empty matrix");
  return s.abs_diff / static_cast<double>(ref.size());
}

std::string format_number(double v) { return fmt::format("{:.12g}", v); }

std::string format_optional(const std::optional<double>& v) {
  return v ? format_number(*v) : std::string();
}

}  // namespace

double rrmse(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& estimate) {
  return ratio(sums(reference, estimate));
}

double rrmse(const Eigen::MatrixXd& reference, const SVDFactors& estimate) {
  return ratio(sums(reference, estimate));
}

double mae(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& estimate) {
  return mean_abs(sums(reference, estimate), reference);
}

double mae(const Eigen::MatrixXd& reference, const SVDFactors& estimate) {
  return mean_abs(sums(reference, estimate), reference);
}

double speedup(double t_hr, double t_lr) {
  if (!(t_hr > 0.0) || !(t_lr > 0.0))
    throw ValueError(fmt::format("speedup needs positive times, got {} and {}", t_hr, t_lr));
  return t_hr / t_lr;
}

double ram_compression(double r_hr, double r_lr) {
  if (!(r_hr > 0.0)) throw ValueError("ram_compression needs a positive HR footprint");
  return (r_hr - r_lr) / r_hr;
}

Eigen::VectorXd tracking_series(const SnapshotMatrix& snapshots, const GridPoint& p) {
  const Index row = snapshots.meta().flat_index(p.comp, p.ix, p.iy, p.iz);
  return snapshots.data().row(row).transpose();
}

std::string MetricsReport::csv_header() {
  return "case,eta,cr_ub,cr_w,t_comp_s,speedup,mae,rrmse,peak_bytes,ram_compression";
}

std::string MetricsReport::csv_row() const {
  return fmt::format("{},{},{},{},{},{},{},{},{},{}", case_label, format_number(noise_eta),
                     format_number(c_r_ub), format_number(c_r_w), format_number(wall_time_s),
                     format_optional(speedup), format_number(mae), format_number(rrmse),
                     peak_bytes, format_optional(ram_compression));
}

std::string MetricsReport::json() const {
  auto optional = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["case"] = case_label;
  j["eta"] = noise_eta;
  j["cr_ub"] = c_r_ub;
  j["cr_w"] = c_r_w;
  j["t_comp_s"] = wall_time_s;
  j["speedup"] = optional(speedup);
  j["mae"] = mae;
  j["rrmse"] = rrmse;
  j["peak_bytes"] = peak_bytes;
  j["ram_compression"] = optional(ram_compression);
  j["mae_pct"] = optional(mae_pct);
  return j.dump(2);
}

}  // namespace lrenkf
