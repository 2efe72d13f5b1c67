/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <vector>

#include <Eigen/Dense>

#include "lrenkf/snapshot.hpp"

namespace lrenkf {

/// Truncated factorization V ~ W diag(sigma) T^T.
///
/// Factors produced by truncated_svd have orthonormal W and T. Factors
/// recovered by the low-cost reconstruction are only approximately so;
/// orthonormality_error() tells how far.
struct SVDFactors {
  Eigen::MatrixXd modes;             ///< W, J x N
  Eigen::VectorXd singular_values;   ///< sigma, length N
  Eigen::MatrixXd coefficients;      ///< T, K x N

  Index rank() const { return singular_values.size(); }
  Index rows() const { return modes.rows(); }
  Index cols() const { return coefficients.rows(); }

  /// W diag(sigma) T^T as a dense matrix.
  Eigen::MatrixXd reconstruct() const;
  /// Column k of the reconstruction without forming the full matrix.
  Eigen::VectorXd column(Index k) const;
  /// max(|W^T W - I|_max, |T^T T - I|_max).
  double orthonormality_error() const;
};

/// Rule for the number of retained modes.
class TruncationPolicy {
 public:
  enum class Kind { tolerance, fixed_rank, fraction_of_min_dim };

  /// Keep the smallest N with sigma_{N+1} / sigma_1 <= eps. eps = 0 keeps every nonzero mode.
  static TruncationPolicy tolerance(double eps);
  static TruncationPolicy fixed_rank(Index rank);
  /// N = max(1, floor(f * min(J, K))).
  static TruncationPolicy fraction_of_min_dim(double fraction);

  Kind kind() const { return kind_; }
  double tolerance_value() const { return value_; }
  double fraction_value() const { return value_; }
  Index rank_value() const { return rank_; }

  /// Mode count for a J x K matrix with (descending) singular values `sigma`.
  Index select(const Eigen::VectorXd& sigma, Index rows, Index cols) const;

 private:
  TruncationPolicy(Kind kind, double value, Index rank) : kind_(kind), value_(value), rank_(rank) {}
  Kind kind_;
  double value_;
  Index rank_;
};

SVDFactors truncated_svd(const Eigen::MatrixXd& data, const TruncationPolicy& policy);

/// Data-independent mode count for a reduced J_bar x K_bar matrix. For the
/// tolerance rule, which needs the spectrum, the upper bound min(J_bar, K_bar).
Index mode_count(const TruncationPolicy& policy, Index reduced_rows, Index reduced_cols);

/// Q = M R^-1 from a Householder QR with diag(R) > 0. Throws NumericalError on
/// a collapsed column.
Eigen::MatrixXd reorthonormalize(const Eigen::MatrixXd& nearly_orthonormal);

struct ModePair {
  Eigen::MatrixXd modes;
  Eigen::MatrixXd coefficients;
};

/// Negates the coefficient columns whose entry of diag(W^T V T) is negative.
ModePair fix_signs(Eigen::MatrixXd modes, Eigen::MatrixXd coefficients,
                   const Eigen::MatrixXd& data);

struct LcsvdFactors {
  /// SVD of the reduced matrix after re-orthonormalization and sign fixing;
  /// singular values are diag(W^T V T).
  SVDFactors reduced;
  /// Modes lifted to J rows and coefficients lifted to K rows.
  SVDFactors recovered;
  /// Reduced-mode positions dropped for sigma_n < 1e-14 * sigma_max.
  std::vector<Index> dropped_modes;
};

struct LcsvdResult {
  Eigen::MatrixXd reconstruction;
  LcsvdFactors factors;
};

/// Low-cost SVD: factorize the reduced matrix, then lift modes with the J x K_bar
/// semi-reduced matrix and coefficients with the J_bar x K one.
LcsvdFactors lcsvd_factorize(const ReducedSnapshotMatrix& reduced,
                             const Eigen::MatrixXd& rows_full,
                             const Eigen::MatrixXd& cols_full,
                             const TruncationPolicy& policy);

/// Same as lcsvd_factorize with rows_full = `background_full` whose sensor rows
/// are replaced by the reduced data, and cols_full = reduced data. Requires a
/// time stride of 1. The overlaid matrix is never materialized.
LcsvdFactors lcsvd_factorize_overlay(const ReducedSnapshotMatrix& reduced,
                                     const Eigen::MatrixXd& background_full,
                                     const TruncationPolicy& policy);

LcsvdResult lcsvd_reconstruct(const ReducedSnapshotMatrix& reduced,
                              const Eigen::MatrixXd& rows_full,
                              const Eigen::MatrixXd& cols_full,
                              const TruncationPolicy& policy);

/// Largest simultaneously-live set of doubles (in bytes) held by lcsvd_factorize
/// for the given sizes and retained rank, excluding its read-only inputs.
std::size_t lcsvd_footprint_bytes(Index full_rows, Index reduced_rows, Index full_cols,
                                  Index reduced_cols, Index rank);

}  // namespace lrenkf
