/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lrenkf/enkf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "lrenkf/error.hpp"
#include "lrenkf/parallel.hpp"
#include "lrenkf/random.hpp"

namespace lrenkf {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kProcessStream = 2;
constexpr std::uint64_t kObservationStream = 3;

// Smallest reciprocal condition number accepted for the innovation covariance.
constexpr double kMinRcond = 1e-15;

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw ValueError(std::string(what) + " contains non-finite values");
}

// Adds scale * N(0, I) to every column, one RNG stream per column.
void add_member_noise(Eigen::MatrixXd& members, double scale, std::uint64_t seed,
                      std::uint64_t stream, Index time_index) {
  if (scale == 0.0) return;
  parallel_for(static_cast<std::size_t>(members.cols()), [&](std::size_t i) {
    RandomEngine engine(derive_seed(seed, {stream, static_cast<std::uint64_t>(time_index),
                                           static_cast<std::uint64_t>(i)}));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto col = members.col(static_cast<Index>(i));
    for (Index r = 0; r < col.size(); ++r) col(r) += scale * normal(engine);
  });
}

Eigen::MatrixXd centered(const Eigen::MatrixXd& m) {
  const Eigen::VectorXd mean = m.rowwise().mean();
  return m.colwise() - mean;
}

}  // namespace

void EnKFConfig::validate() const {
  if (ensemble_size < 2) throw ValueError("ensemble_size must be at least 2");
  if (!(init_spread >= 0.0) || !std::isfinite(init_spread))
    throw ValueError("init_spread must be finite and non-negative");
  if (!(process_noise_std >= 0.0) || !std::isfinite(process_noise_std))
    throw ValueError("process_noise_std must be finite and non-negative");
  if (!(anomaly_retention >= 0.0 && anomaly_retention <= 1.0))
    throw ValueError("anomaly_retention must lie in [0, 1]");
}

EnKFConfig EnKFConfig::small_ensemble_preset() {
  EnKFConfig c;
  c.ensemble_size = 25;
  return c;
}

EnKFConfig EnKFConfig::large_ensemble_preset() {
  EnKFConfig c;
  c.ensemble_size = 45;
  return c;
}

Ensemble::Ensemble(Eigen::MatrixXd members, Index time_index)
    : members_(std::move(members)), time_index_(time_index) {
  if (members_.cols() < 2) throw ShapeError("an ensemble needs at least 2 members");
  if (members_.rows() < 1) throw ShapeError("ensemble members are empty");
  require_finite(members_, "ensemble");
}

Eigen::VectorXd Ensemble::mean() const { return members_.rowwise().mean(); }

Eigen::MatrixXd Ensemble::anomalies() const { return centered(members_); }

double Ensemble::spread_trace() const {
  return anomalies().squaredNorm() / static_cast<double>(size() - 1);
}

ObservationModel::ObservationModel(SensorSet sensors, Eigen::VectorXd noise_variance)
    : sensors_(std::move(sensors)), noise_variance_(std::move(noise_variance)) {
  if (noise_variance_.size() != sensors_.size())
    throw ShapeError("noise variance length " + std::to_string(noise_variance_.size()) +
                     " != sensor count " + std::to_string(sensors_.size()));
  for (Index i = 0; i < noise_variance_.size(); ++i) {
    if (!(noise_variance_(i) >= 0.0) || !std::isfinite(noise_variance_(i)))
      throw ValueError("noise variance must be finite and non-negative");
  }
}

ObservationModel ObservationModel::with_uniform_noise(SensorSet sensors, double variance) {
  const Index m = sensors.size();
  return ObservationModel(std::move(sensors), Eigen::VectorXd::Constant(m, variance));
}

Eigen::MatrixXd ObservationModel::matrix() const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(sensors_.size(), sensors_.source_size());
  for (Index i = 0; i < sensors_.size(); ++i) h(i, sensors_[i]) = 1.0;
  return h;
}

Eigen::MatrixXd ObservationModel::observe(const Eigen::MatrixXd& states) const {
  if (states.rows() != state_size())
    throw ShapeError("state length " + std::to_string(states.rows()) +
                     " does not match observation operator source " +
                     std::to_string(state_size()));
  return extract_rows(states, sensors_, 1);
}

BackgroundAnchoredModel::BackgroundAnchoredModel(double retention) : retention_(retention) {
  if (!(retention >= 0.0 && retention <= 1.0))
    throw ValueError("anomaly_retention must lie in [0, 1]");
}

void BackgroundAnchoredModel::propagate(
    Eigen::MatrixXd& members, const Eigen::Ref<const Eigen::VectorXd>& background_next) const {
  const Eigen::VectorXd mean = members.rowwise().mean();
  members = (retention_ * (members.colwise() - mean)).colwise() + background_next;
}

Ensemble init_ensemble(const Eigen::VectorXd& background, const EnKFConfig& config) {
  config.validate();
  if (background.size() < 1) throw ShapeError("initial background is empty");
  require_finite(background, "initial background");
  Eigen::MatrixXd members = background.replicate(1, config.ensemble_size);
  add_member_noise(members, config.init_spread, config.seed, kInitStream, 0);
  return Ensemble(std::move(members), 0);
}

Ensemble forecast(const Ensemble& ensemble, const Eigen::VectorXd& background_next,
                  const EnKFConfig& config) {
  return forecast(ensemble, background_next, config,
                  BackgroundAnchoredModel(config.anomaly_retention));
}

Ensemble forecast(const Ensemble& ensemble, const Eigen::VectorXd& background_next,
                  const EnKFConfig& config, const ForecastModel& model) {
  config.validate();
  if (background_next.size() != ensemble.state_size())
    throw ShapeError("background length " + std::to_string(background_next.size()) +
                     " != member length " + std::to_string(ensemble.state_size()));
  Eigen::MatrixXd members = ensemble.members();
  model.propagate(members, background_next);
  const Index next = ensemble.time_index() + 1;
  add_member_noise(members, config.process_noise_std, config.seed, kProcessStream, next);
  return Ensemble(std::move(members), next);
}

Eigen::MatrixXd background_covariance(const Ensemble& ensemble, std::size_t max_entries) {
  const auto n = static_cast<std::size_t>(ensemble.state_size());
  if (n * n > max_entries)
    throw ValueError("explicit covariance of size " + std::to_string(n) + "^2 exceeds the " +
                     std::to_string(max_entries) + "-entry guard; use the anomaly gain");
  const Eigen::MatrixXd a = ensemble.anomalies();
  Eigen::MatrixXd b = a * a.transpose() / static_cast<double>(ensemble.size() - 1);
  return 0.5 * (b + b.transpose());
}

KalmanGain kalman_gain_anomaly(const Ensemble& ensemble, const ObservationOperator& obs) {
  if (obs.state_size() != ensemble.state_size())
    throw ShapeError("observation operator expects states of length " +
                     std::to_string(obs.state_size()) + ", ensemble has " +
                     std::to_string(ensemble.state_size()));
  const Index e = ensemble.size();
  const Index m = obs.observation_size();
  const double scale = static_cast<double>(e - 1);
  const Eigen::VectorXd& r = obs.noise_variance();

  KalmanGain gain;
  gain.anomalies = ensemble.anomalies();
  const Eigen::MatrixXd ha = centered(obs.observe(ensemble.members()));

  // With more observations than members and R > 0, invert in ensemble space:
  // (HA)^T S^-1 = (I + Y HA)^-1 Y with Y = (HA)^T ((E-1) R)^-1.
  if (m > e && (r.array() > 0.0).all()) {
    const Eigen::MatrixXd y = ha.transpose() * (scale * r).cwiseInverse().asDiagonal();
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(e, e) + y * ha;
    c = 0.5 * (c + c.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success)
      throw NumericalError("ensemble-space gain system is not positive definite");
    gain.weights = llt.solve(y);
    gain.ensemble_space = true;
    return gain;
  }

  Eigen::MatrixXd s = ha * ha.transpose();
  s.diagonal() += scale * r;
  s = 0.5 * (s + s.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success || llt.rcond() < kMinRcond)
    throw NumericalError("innovation covariance is numerically singular (zero spread with zero R?)");
  gain.weights = llt.solve(ha).transpose();
  return gain;
}

Eigen::MatrixXd perturb_observations(const Eigen::VectorXd& observation,
                                     const ObservationOperator& obs, Index ensemble_size,
                                     std::uint64_t seed, Index time_index) {
  const Index m = obs.observation_size();
  if (observation.size() != m)
    throw ShapeError("observation length " + std::to_string(observation.size()) +
                     " != sensor count " + std::to_string(m));
  if (ensemble_size < 1) throw ValueError("ensemble_size must be positive");
  require_finite(observation, "observation");
  const Eigen::VectorXd std_dev = obs.noise_variance().cwiseSqrt();
  Eigen::MatrixXd out = observation.replicate(1, ensemble_size);
  if ((std_dev.array() == 0.0).all()) return out;
  parallel_for(static_cast<std::size_t>(ensemble_size), [&](std::size_t i) {
    RandomEngine engine(derive_seed(seed, {kObservationStream,
                                           static_cast<std::uint64_t>(time_index),
                                           static_cast<std::uint64_t>(i)}));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto col = out.col(static_cast<Index>(i));
    for (Index r = 0; r < m; ++r) col(r) += std_dev(r) * normal(engine);
  });
  return out;
}

Ensemble analysis_update(const Ensemble& ensemble, const Eigen::VectorXd& observation,
                         const ObservationOperator& obs, std::uint64_t seed) {
  const KalmanGain gain = kalman_gain_anomaly(ensemble, obs);
  Eigen::MatrixXd innovations = perturb_observations(observation, obs, ensemble.size(), seed,
                                                     ensemble.time_index());
  innovations -= obs.observe(ensemble.members());
  Eigen::MatrixXd members = ensemble.members() + gain.apply(innovations);
  return Ensemble(std::move(members), ensemble.time_index());
}

AssimilationResult assimilate_window(const Eigen::MatrixXd& background,
                                     const ObservationSeries& observations,
                                     const ObservationOperator& obs, const EnKFConfig& config,
                                     const ForecastModel* model) {
  config.validate();
  const Index n = background.rows();
  const Index steps = background.cols();
  if (n < 1 || steps < 1) throw ShapeError("background window is empty");
  if (obs.state_size() != n)
    throw ShapeError("observation operator expects states of length " +
                     std::to_string(obs.state_size()) + ", background has " + std::to_string(n));
  for (const auto& [k, w] : observations) {
    if (k < 0 || k >= steps)
      throw ValueError("observation at unknown time " + std::to_string(k) + " (window has " +
                       std::to_string(steps) + " steps)");
    if (w.size() != obs.observation_size())
      throw ShapeError("observation at time " + std::to_string(k) + " has length " +
                       std::to_string(w.size()) + ", expected " +
                       std::to_string(obs.observation_size()));
  }

  const BackgroundAnchoredModel anchored(config.anomaly_retention);
  const ForecastModel& m = model ? *model : anchored;

  AssimilationResult result;
  result.analysis.resize(n, steps);
  result.spread.resize(steps);
  const auto start = std::chrono::steady_clock::now();

  Ensemble ens = init_ensemble(background.col(0), config);
  for (Index k = 0; k < steps; ++k) {
    if (k > 0) ens = forecast(ens, background.col(k), config, m);
    if (auto it = observations.find(k); it != observations.end())
      ens = analysis_update(ens, it->second, obs, config.seed);
    result.analysis.col(k) = ens.mean();
    result.spread(k) = ens.spread_trace();
  }

  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.peak_state_bytes =
      assimilation_footprint_bytes(n, obs.observation_size(), config.ensemble_size, steps);
  return result;
}

AssimilationResult assimilate_window(const SnapshotMatrix& background,
                                     const ObservationSeries& observations,
                                     const ObservationOperator& obs, const EnKFConfig& config,
                                     const ForecastModel* model) {
  return assimilate_window(background.data(), observations, obs, config, model);
}

AssimilationResult assimilate_window(const ReducedSnapshotMatrix& background,
                                     const ObservationSeries& observations,
                                     const ObservationOperator& obs, const EnKFConfig& config,
                                     const ForecastModel* model) {
  background.validate();
  return assimilate_window(background.data, observations, obs, config, model);
}

std::size_t assimilation_footprint_bytes(Index state_size, Index observation_size,
                                         Index ensemble_size, Index steps) {
  const auto n = static_cast<std::size_t>(state_size);
  const auto m = static_cast<std::size_t>(observation_size);
  const auto e = static_cast<std::size_t>(ensemble_size);
  const auto k = static_cast<std::size_t>(steps);
  // Outputs live for the whole window.
  const std::size_t outputs = n * k + k;
  // Forecast: current and propagated members plus the mean.
  const std::size_t forecast_stage = 2 * n * e + n;
  // Analysis: members, anomalies, updated members, observed members, observed
  // anomalies, innovations, weights and the solver workspace.
  const std::size_t solver = (m > e) ? e * e + e * m : m * m;
  const std::size_t analysis_stage = 3 * n * e + 3 * m * e + e * m + solver;
  return 8 * (outputs + std::max(forecast_stage, analysis_stage));
}

}  // namespace lrenkf
