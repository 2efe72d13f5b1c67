/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <string>

#include "lrenkf/enkf.hpp"
#include "lrenkf/snapshot.hpp"

namespace lrenkf {

enum class TruthKind { traveling_wave, oscillating_wake };

std::string to_string(TruthKind kind);
/// Accepts "traveling_wave" and "oscillating_wake"; throws ValueError otherwise.
TruthKind parse_truth_kind(const std::string& name);

/// Analytic truth field. Coordinates are grid indices and t = k * dt.
struct TruthSpec {
  TruthKind kind = TruthKind::oscillating_wake;
  FieldMeta meta;
  double amplitude = 1.0;
  /// Transverse wavelength (wave) or wake width scale (wake).
  double wavelength = 16.0;
  double period = 2.0;
  double convection_speed = 8.0;

  void validate() const;
};

struct NoiseSpec {
  double eta = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

SnapshotMatrix generate_truth(const TruthSpec& spec);

/// Population standard deviation over all entries.
double global_std(const Eigen::MatrixXd& data);

/// V + N(0, (eta * sigma_T)^2) entrywise. Returns an exact copy when eta or
/// sigma_T is zero.
SnapshotMatrix add_noise(const SnapshotMatrix& snapshots, const NoiseSpec& spec);

struct TwinExperiment {
  SnapshotMatrix background_full;
  ReducedSnapshotMatrix background_reduced;
  ObservationSeries observations;
  SensorSet w_sensors;
  Index w_time_stride = 1;
};

/// Noisy background and observations drawn from `truth` with independent noise.
/// Observations are kept at times 0, stride, 2 * stride, ...
TwinExperiment make_twin_experiment(const SnapshotMatrix& truth, const SensorSet& ub_sensors,
                                    const SensorSet& w_sensors, const NoiseSpec& noise_ub,
                                    const NoiseSpec& noise_w, Index w_time_stride);

}  // namespace lrenkf
