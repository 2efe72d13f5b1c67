/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

// Independent reference computations for the tests. Nothing here calls into
// the library's numerical code.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline MatrixXd low_rank(Index rows, Index cols, Index rank, std::mt19937_64& rng) {
  return gaussian(rows, rank, rng) * gaussian(rank, cols, rng);
}

// Sample covariance by the textbook double loop over member pairs.
inline MatrixXd covariance(const MatrixXd& members) {
  const Index n = members.rows();
  const Index e = members.cols();
  VectorXd mean = VectorXd::Zero(n);
  for (Index i = 0; i < e; ++i)
    for (Index r = 0; r < n; ++r) mean(r) += members(r, i) / static_cast<double>(e);
  MatrixXd b = MatrixXd::Zero(n, n);
  for (Index i = 0; i < e; ++i)
    for (Index r = 0; r < n; ++r)
      for (Index s = 0; s < n; ++s)
        b(r, s) += (members(r, i) - mean(r)) * (members(s, i) - mean(s)) / static_cast<double>(e - 1);
  return b;
}

// K = B H^T (H B H^T + R)^-1 with a full-pivot LU, the textbook gain.
inline MatrixXd explicit_gain(const MatrixXd& b, const MatrixXd& h, const VectorXd& r) {
  MatrixXd s = h * b * h.transpose();
  s.diagonal() += r;
  const MatrixXd bht = b * h.transpose();
  // K S = B H^T  <=>  S^T K^T = (B H^T)^T
  return s.transpose().fullPivLu().solve(bht.transpose()).transpose();
}

// Selection matrix for the given rows.
inline MatrixXd selection(const std::vector<Index>& rows, Index n) {
  MatrixXd h = MatrixXd::Zero(static_cast<Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) h(static_cast<Index>(i), rows[i]) = 1.0;
  return h;
}

// Singular values from the eigenvalues of V^T V, descending.
inline VectorXd singular_values_eig(const MatrixXd& v) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(v.transpose() * v);
  VectorXd ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::sort(ev.data(), ev.data() + ev.size(), std::greater<double>());
  return ev;
}

// Singular values from one-sided Jacobi, descending.
inline VectorXd singular_values_jacobi(const MatrixXd& v) {
  return Eigen::JacobiSVD<MatrixXd>(v).singularValues();
}

inline double rel_frobenius(const MatrixXd& ref, const MatrixXd& est) {
  return (ref - est).norm() / ref.norm();
}

inline double rel_max_abs(const MatrixXd& ref, const MatrixXd& est) {
  return (ref - est).cwiseAbs().maxCoeff() / std::max(ref.cwiseAbs().maxCoeff(), 1e-300);
}

inline double sample_std(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

}  // namespace oracle
