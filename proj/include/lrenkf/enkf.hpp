/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <map>

#include <Eigen/Dense>

#include "lrenkf/snapshot.hpp"

namespace lrenkf {

/// Stochastic EnKF settings. Background and model-error covariances are
/// isotropic: init_spread^2 * I and process_noise_std^2 * I.
struct EnKFConfig {
  Index ensemble_size = 25;
  double init_spread = 0.0;
  double process_noise_std = 0.0;
  /// Fraction of the ensemble anomaly kept by the background-anchored forecast.
  double anomaly_retention = 1.0;
  std::uint64_t seed = 0;

  void validate() const;

  /// E = 25.
  static EnKFConfig small_ensemble_preset();
  /// E = 45, for fields whose error needs more ensemble directions.
  static EnKFConfig large_ensemble_preset();
};

/// E state vectors stored as the columns of an n x E matrix.
class Ensemble {
 public:
  explicit Ensemble(Eigen::MatrixXd members, Index time_index = 0);

  const Eigen::MatrixXd& members() const { return members_; }
  Index size() const { return members_.cols(); }
  Index state_size() const { return members_.rows(); }
  Index time_index() const { return time_index_; }

  Eigen::VectorXd mean() const;
  /// Members minus the ensemble mean (n x E).
  Eigen::MatrixXd anomalies() const;
  /// Trace of the unbiased sample covariance.
  double spread_trace() const;

 private:
  Eigen::MatrixXd members_;
  Index time_index_;
};

/// Observation operator h and its diagonal noise covariance R.
///
/// The analysis only evaluates h on ensemble members, so a nonlinear operator
/// needs no explicit Jacobian: the observed anomalies play its role.
class ObservationOperator {
 public:
  virtual ~ObservationOperator() = default;
  virtual Index state_size() const = 0;
  virtual Index observation_size() const = 0;
  /// h applied to every column of `states`.
  virtual Eigen::MatrixXd observe(const Eigen::MatrixXd& states) const = 0;
  /// Diagonal of R.
  virtual const Eigen::VectorXd& noise_variance() const = 0;
};

/// Linear selection operator: observations are state rows picked by a SensorSet.
class ObservationModel final : public ObservationOperator {
 public:
  ObservationModel(SensorSet sensors, Eigen::VectorXd noise_variance);
  static ObservationModel with_uniform_noise(SensorSet sensors, double variance);

  const SensorSet& sensors() const { return sensors_; }
  /// Dense m x n selection matrix.
  Eigen::MatrixXd matrix() const;

  Index state_size() const override { return sensors_.source_size(); }
  Index observation_size() const override { return sensors_.size(); }
  Eigen::MatrixXd observe(const Eigen::MatrixXd& states) const override;
  const Eigen::VectorXd& noise_variance() const override { return noise_variance_; }

 private:
  SensorSet sensors_;
  Eigen::VectorXd noise_variance_;
};

/// Deterministic part M of the forecast. Process noise is added by forecast().
class ForecastModel {
 public:
  virtual ~ForecastModel() = default;
  /// Advances every column of `members` to the next time; `background_next`
  /// is the background state at that time.
  virtual void propagate(Eigen::MatrixXd& members,
                         const Eigen::Ref<const Eigen::VectorXd>& background_next) const = 0;
};

/// Anchors the ensemble to the next background state and keeps a fraction of
/// each member's anomaly: u_i <- u_b(k+1) + retention * (u_i - mean).
class BackgroundAnchoredModel final : public ForecastModel {
 public:
  explicit BackgroundAnchoredModel(double retention);
  void propagate(Eigen::MatrixXd& members,
                 const Eigen::Ref<const Eigen::VectorXd>& background_next) const override;

 private:
  double retention_;
};

/// Factored gain K = anomalies * weights, with weights = (HA)^T [(HA)(HA)^T + (E-1) R]^-1.
struct KalmanGain {
  Eigen::MatrixXd anomalies;  ///< A, n x E
  Eigen::MatrixXd weights;    ///< E x m
  /// True when the inverse was taken in the E-dimensional ensemble space.
  bool ensemble_space = false;

  Eigen::MatrixXd dense() const { return anomalies * weights; }
  /// K * innovations for an m x p block of innovations.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& innovations) const {
    return anomalies * (weights * innovations);
  }
};

Ensemble init_ensemble(const Eigen::VectorXd& background, const EnKFConfig& config);

/// Background-anchored forecast with the config's anomaly retention.
Ensemble forecast(const Ensemble& ensemble, const Eigen::VectorXd& background_next,
                  const EnKFConfig& config);
Ensemble forecast(const Ensemble& ensemble, const Eigen::VectorXd& background_next,
                  const EnKFConfig& config, const ForecastModel& model);

/// Unbiased sample covariance of the members. Meant for small states; throws
/// ValueError when n * n exceeds `max_entries`.
Eigen::MatrixXd background_covariance(const Ensemble& ensemble,
                                      std::size_t max_entries = 100'000'000);

/// Gain from ensemble anomalies, never forming the n x n covariance.
KalmanGain kalman_gain_anomaly(const Ensemble& ensemble, const ObservationOperator& obs);

/// m x E matrix whose column i is w + N(0, R) drawn from the stream of member i.
Eigen::MatrixXd perturb_observations(const Eigen::VectorXd& observation,
                                     const ObservationOperator& obs, Index ensemble_size,
                                     std::uint64_t seed, Index time_index);

/// Stochastic EnKF update of every member with its own perturbed observation.
Ensemble analysis_update(const Ensemble& ensemble, const Eigen::VectorXd& observation,
                         const ObservationOperator& obs, std::uint64_t seed);

/// Observation vectors keyed by snapshot index.
using ObservationSeries = std::map<Index, Eigen::VectorXd>;

struct AssimilationResult {
  Eigen::MatrixXd analysis;       ///< ensemble mean per step, n x K
  Eigen::VectorXd spread;         ///< trace of the sample covariance per step
  double wall_time_s = 0.0;
  std::size_t peak_state_bytes = 0;
};

/// Runs forecast/analysis cycles over the columns of `background`.
AssimilationResult assimilate_window(const Eigen::MatrixXd& background,
                                     const ObservationSeries& observations,
                                     const ObservationOperator& obs, const EnKFConfig& config,
                                     const ForecastModel* model = nullptr);
AssimilationResult assimilate_window(const SnapshotMatrix& background,
                                     const ObservationSeries& observations,
                                     const ObservationOperator& obs, const EnKFConfig& config,
                                     const ForecastModel* model = nullptr);
AssimilationResult assimilate_window(const ReducedSnapshotMatrix& background,
                                     const ObservationSeries& observations,
                                     const ObservationOperator& obs, const EnKFConfig& config,
                                     const ForecastModel* model = nullptr);

/// Analytic byte count of the largest live matrix set of assimilate_window for an
/// n-dimensional state, m observations, E members and K steps. Read-only inputs
/// (background, observations) are not counted.
std::size_t assimilation_footprint_bytes(Index state_size, Index observation_size,
                                         Index ensemble_size, Index steps);

}  // namespace lrenkf
