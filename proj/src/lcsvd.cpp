/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lrenkf/lcsvd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "lrenkf/error.hpp"

namespace lrenkf {
namespace {

constexpr double kInversionFloor = 1e-14;

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw ValueError(fmt::format("{} contains non-finite entries", what));
}

/// Shared tail of the low-cost reconstruction once the reduced matrix has been
/// factorized. `lift_rows(X)` must return rows_full * X and `lift_cols(Y)`
/// cols_full^T * Y.
template <typename LiftRows, typename LiftCols>
LcsvdFactors lift(const Eigen::MatrixXd& reduced, const TruncationPolicy& policy,
                  LiftRows&& lift_rows, LiftCols&& lift_cols) {
  const SVDFactors svd = truncated_svd(reduced, policy);
  if (svd.rank() == 0) {
    throw NumericalError("reduced data has no nonzero singular value");
  }

  // Steps 2-3: re-orthonormalize both factor sets, then make diag(W^T V T) >= 0.
  ModePair fixed = fix_signs(reorthonormalize(svd.modes), reorthonormalize(svd.coefficients),
                             reduced);
  const Eigen::MatrixXd projected = reduced * fixed.coefficients;
  Eigen::VectorXd sigma(svd.rank());
  for (Index n = 0; n < sigma.size(); ++n) sigma(n) = fixed.modes.col(n).dot(projected.col(n));

  const double sigma_max = sigma.maxCoeff();
  if (!(sigma_max > 0.0)) {
    throw NumericalError("recomputed singular values are all zero");
  }
  std::vector<Index> kept;
  LcsvdFactors out;
  for (Index n = 0; n < sigma.size(); ++n) {
    if (sigma(n) >= kInversionFloor * sigma_max) {
      kept.push_back(n);
    } else {
      out.dropped_modes.push_back(n);
    }
  }
  const auto rank = static_cast<Index>(kept.size());
  out.reduced.modes.resize(fixed.modes.rows(), rank);
  out.reduced.coefficients.resize(fixed.coefficients.rows(), rank);
  out.reduced.singular_values.resize(rank);
  for (Index i = 0; i < rank; ++i) {
    const Index n = kept[static_cast<std::size_t>(i)];
    out.reduced.modes.col(i) = fixed.modes.col(n);
    out.reduced.coefficients.col(i) = fixed.coefficients.col(n);
    out.reduced.singular_values(i) = sigma(n);
  }

  const Eigen::VectorXd inv_sigma = out.reduced.singular_values.cwiseInverse();
  // Steps 4-5.
  const Eigen::MatrixXd row_weights = out.reduced.coefficients * inv_sigma.asDiagonal();
  const Eigen::MatrixXd col_weights = out.reduced.modes * inv_sigma.asDiagonal();
  out.recovered.modes = lift_rows(row_weights);
  out.recovered.coefficients = lift_cols(col_weights);
  out.recovered.singular_values = out.reduced.singular_values;
  return out;
}

void check_subselection(const ReducedSnapshotMatrix& reduced, const Eigen::MatrixXd& rows_full,
                        const Eigen::MatrixXd& cols_full) {
  reduced.validate();
  const Index full_rows = reduced.parent_meta.state_size();
  const Index full_cols = reduced.parent_meta.n_t;
  if (rows_full.rows() != full_rows || rows_full.cols() != reduced.data.cols()) {
    throw ShapeError(fmt::format("row-full matrix is {}x{}, expected {}x{}", rows_full.rows(),
                                 rows_full.cols(), full_rows, reduced.data.cols()));
  }
  if (cols_full.rows() != reduced.data.rows() || cols_full.cols() != full_cols) {
    throw ShapeError(fmt::format("column-full matrix is {}x{}, expected {}x{}", cols_full.rows(),
                                 cols_full.cols(), reduced.data.rows(), full_cols));
  }
  const double tol = 1e-12 * std::max(1.0, reduced.data.cwiseAbs().maxCoeff());
  for (Index k = 0; k < reduced.data.cols(); ++k) {
    for (Index i = 0; i < reduced.data.rows(); ++i) {
      const double v = reduced.data(i, k);
      if (std::abs(rows_full(reduced.sensors[i], k) - v) > tol) {
        throw ValueError(fmt::format(
            "reduced entry ({}, {}) is not row {} of the row-full matrix", i, k,
            reduced.sensors[i]));
      }
      if (std::abs(cols_full(i, k * reduced.time_stride) - v) > tol) {
        throw ValueError(fmt::format(
            "reduced entry ({}, {}) is not column {} of the column-full matrix", i, k,
            k * reduced.time_stride));
      }
    }
  }
}

}  // namespace

Eigen::MatrixXd SVDFactors::reconstruct() const {
  return modes * singular_values.asDiagonal() * coefficients.transpose();
}

Eigen::VectorXd SVDFactors::column(Index k) const {
  const Eigen::VectorXd weights =
      singular_values.cwiseProduct(coefficients.row(k).transpose());
  return modes * weights;
}

double SVDFactors::orthonormality_error() const {
  const Index n = rank();
  if (n == 0) return 0.0;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  const double w = (modes.transpose() * modes - eye).cwiseAbs().maxCoeff();
  const double t = (coefficients.transpose() * coefficients - eye).cwiseAbs().maxCoeff();
  return std::max(w, t);
}

TruncationPolicy TruncationPolicy::tolerance(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw ValueError(fmt::format("SVD tolerance must lie in [0, 1], got {}", eps));
  }
  return TruncationPolicy(Kind::tolerance, eps, 0);
}

TruncationPolicy TruncationPolicy::fixed_rank(Index rank) {
  if (rank < 1) throw ValueError(fmt::format("fixed rank must be >= 1, got {}", rank));
  return TruncationPolicy(Kind::fixed_rank, 0.0, rank);
}

TruncationPolicy TruncationPolicy::fraction_of_min_dim(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValueError(fmt::format("mode fraction must lie in (0, 1], got {}", fraction));
  }
  return TruncationPolicy(Kind::fraction_of_min_dim, fraction, 0);
}

Index TruncationPolicy::select(const Eigen::VectorXd& sigma, Index rows, Index cols) const {
  Index positive = 0;
  while (positive < sigma.size() && sigma(positive) > 0.0) ++positive;
  if (positive == 0) return 0;

  Index n = 0;
  switch (kind_) {
    case Kind::tolerance: {
      n = positive;
      for (Index i = 1; i < positive; ++i) {
        if (sigma(i) / sigma(0) <= value_) {
          n = i;
          break;
        }
      }
      break;
    }
    case Kind::fixed_rank:
    case Kind::fraction_of_min_dim:
      n = mode_count(*this, rows, cols);
      break;
  }
  return std::min(n, positive);
}

Index mode_count(const TruncationPolicy& policy, Index reduced_rows, Index reduced_cols) {
  if (reduced_rows < 1 || reduced_cols < 1) {
    throw ValueError("mode count needs a non-empty matrix");
  }
  const Index min_dim = std::min(reduced_rows, reduced_cols);
  switch (policy.kind()) {
    case TruncationPolicy::Kind::fraction_of_min_dim: {
      // The small offset keeps products such as 0.29 * 100 from flooring to 28.
      const auto n = static_cast<Index>(
          std::floor(policy.fraction_value() * static_cast<double>(min_dim) + 1e-9));
      return std::clamp<Index>(n, 1, min_dim);
    }
    case TruncationPolicy::Kind::fixed_rank:
      return std::min(policy.rank_value(), min_dim);
    case TruncationPolicy::Kind::tolerance:
      return min_dim;
  }
  return min_dim;
}

SVDFactors truncated_svd(const Eigen::MatrixXd& data, const TruncationPolicy& policy) {
  if (data.rows() == 0 || data.cols() == 0) throw ShapeError("cannot factorize an empty matrix");
  require_finite(data, "SVD input");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const Index n = policy.select(sigma, data.rows(), data.cols());

  SVDFactors out;
  out.modes = svd.matrixU().leftCols(n);
  out.singular_values = sigma.head(n);
  out.coefficients = svd.matrixV().leftCols(n);
  return out;
}

Eigen::MatrixXd reorthonormalize(const Eigen::MatrixXd& nearly_orthonormal) {
  const Index rows = nearly_orthonormal.rows();
  const Index cols = nearly_orthonormal.cols();
  if (cols == 0) return nearly_orthonormal;
  if (cols > rows) {
    throw NumericalError(fmt::format("{} columns cannot be orthonormal in {} dimensions", cols,
                                     rows));
  }
  require_finite(nearly_orthonormal, "QR input");

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(nearly_orthonormal);
  const Eigen::MatrixXd& packed = qr.matrixQR();
  const double diag_max = packed.diagonal().head(cols).cwiseAbs().maxCoeff();
  const double floor = 10.0 * static_cast<double>(std::max(rows, cols)) *
                       std::numeric_limits<double>::epsilon() * diag_max;
  for (Index i = 0; i < cols; ++i) {
    if (!(std::abs(packed(i, i)) > floor)) {
      throw NumericalError(fmt::format("column {} is linearly dependent on the previous ones", i));
    }
  }
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  for (Index i = 0; i < cols; ++i) {
    if (packed(i, i) < 0.0) q.col(i) = -q.col(i);
  }
  return q;
}

ModePair fix_signs(Eigen::MatrixXd modes, Eigen::MatrixXd coefficients,
                   const Eigen::MatrixXd& data) {
  if (modes.cols() != coefficients.cols() || modes.rows() != data.rows() ||
      coefficients.rows() != data.cols()) {
    throw ShapeError(fmt::format("cannot fix signs of {}x{} modes and {}x{} coefficients "
                                 "against {}x{} data",
                                 modes.rows(), modes.cols(), coefficients.rows(),
                                 coefficients.cols(), data.rows(), data.cols()));
  }
  const Eigen::MatrixXd projected = data * coefficients;
  for (Index n = 0; n < modes.cols(); ++n) {
    if (modes.col(n).dot(projected.col(n)) < 0.0) coefficients.col(n) = -coefficients.col(n);
  }
  return {std::move(modes), std::move(coefficients)};
}

LcsvdFactors lcsvd_factorize(const ReducedSnapshotMatrix& reduced,
                             const Eigen::MatrixXd& rows_full,
                             const Eigen::MatrixXd& cols_full,
                             const TruncationPolicy& policy) {
  check_subselection(reduced, rows_full, cols_full);
  return lift(
      reduced.data, policy,
      [&](const Eigen::MatrixXd& x) -> Eigen::MatrixXd { return rows_full * x; },
      [&](const Eigen::MatrixXd& y) -> Eigen::MatrixXd { return cols_full.transpose() * y; });
}

LcsvdFactors lcsvd_factorize_overlay(const ReducedSnapshotMatrix& reduced,
                                     const Eigen::MatrixXd& background_full,
                                     const TruncationPolicy& policy) {
  reduced.validate();
  if (reduced.time_stride != 1) {
    throw ValueError("overlay reconstruction needs the full time axis (stride 1)");
  }
  if (background_full.rows() != reduced.parent_meta.state_size() ||
      background_full.cols() != reduced.data.cols()) {
    throw ShapeError(fmt::format("background is {}x{}, expected {}x{}", background_full.rows(),
                                 background_full.cols(), reduced.parent_meta.state_size(),
                                 reduced.data.cols()));
  }
  require_finite(background_full, "background");
  return lift(
      reduced.data, policy,
      [&](const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
        Eigen::MatrixXd lifted = background_full * x;
        const Eigen::MatrixXd at_sensors = reduced.data * x;
        for (Index i = 0; i < reduced.sensors.size(); ++i) {
          lifted.row(reduced.sensors[i]) = at_sensors.row(i);
        }
        return lifted;
      },
      [&](const Eigen::MatrixXd& y) -> Eigen::MatrixXd { return reduced.data.transpose() * y; });
}

LcsvdResult lcsvd_reconstruct(const ReducedSnapshotMatrix& reduced,
                              const Eigen::MatrixXd& rows_full,
                              const Eigen::MatrixXd& cols_full,
                              const TruncationPolicy& policy) {
  LcsvdResult result;
  result.factors = lcsvd_factorize(reduced, rows_full, cols_full, policy);
  result.reconstruction = result.factors.recovered.reconstruct();
  return result;
}

std::size_t lcsvd_footprint_bytes(Index full_rows, Index reduced_rows, Index full_cols,
                                  Index reduced_cols, Index rank) {
  const auto min_dim = std::min(reduced_rows, reduced_cols);
  // Stage 1: working copy of the reduced matrix plus thin SVD factors.
  const Index svd_stage = reduced_rows * reduced_cols + (reduced_rows + reduced_cols) * min_dim +
                          min_dim;
  // Stage 2: orthonormalized reduced factors, the two weight matrices and the
  // lifted factors, plus one output column while streaming the result.
  const Index lift_stage = 2 * (reduced_rows + reduced_cols) * rank + full_rows * rank +
                           full_cols * rank + rank + full_rows;
  return static_cast<std::size_t>(std::max(svd_stage, lift_stage)) * sizeof(double);
}

}  // namespace lrenkf
