/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lrenkf/synth.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "lrenkf/error.hpp"
#include "lrenkf/parallel.hpp"
#include "lrenkf/random.hpp"

namespace lrenkf {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kWakeHarmonics = 6;

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

// Streamwise wavelength U * T makes every field exactly T-periodic.
double traveling_wave(const TruthSpec& s, Index comp, double x, double y, double t) {
  const double along = 2.0 * kPi * (x - s.convection_speed * t) / (s.convection_speed * s.period);
  return s.amplitude * std::sin(along) *
         std::cos(2.0 * kPi * y / s.wavelength + static_cast<double>(comp));
}

// Steady velocity deficit plus harmonics of a convected vortex street. The
// transverse component is antisymmetric about the centreline.
double oscillating_wake(const TruthSpec& s, Index comp, double x, double y, double t) {
  const double yc = 0.5 * static_cast<double>(s.meta.n_y - 1);
  const double eta = (y - yc) / (0.25 * s.wavelength);
  const double g = std::exp(-eta * eta);
  const double theta = 2.0 * kPi * (x / (s.convection_speed * s.period) - t / s.period);
  const double arg = kPi * (y - yc) / s.wavelength;

  double value = 0.0;
  if (comp == 0) value = s.amplitude * (1.0 - 0.8 * g);
  double weight = 1.0;
  for (int h = 1; h <= kWakeHarmonics; ++h) {
    weight *= 0.5;
    const double phase = h * theta + 0.3 * h;
    const double a = s.amplitude * weight * g;
    switch (comp) {
      case 0: value += a * std::cos(h * arg) * std::sin(phase); break;
      case 1: value += a * std::sin(h * arg) * std::cos(phase); break;
      default:
        value += a * std::cos(h * arg) * std::cos(phase + kPi * static_cast<double>(comp) / 3.0);
    }
  }
  return value;
}

}  // namespace

std::string to_string(TruthKind kind) {
  return kind == TruthKind::traveling_wave ? "traveling_wave" : "oscillating_wake";
}

TruthKind parse_truth_kind(const std::string& name) {
  if (name == "traveling_wave") return TruthKind::traveling_wave;
  if (name == "oscillating_wake") return TruthKind::oscillating_wake;
  throw ValueError(fmt::format("unknown truth kind '{}'", name));
}

void TruthSpec::validate() const {
  meta.validate();
  if (!positive_finite(amplitude) || !positive_finite(wavelength) || !positive_finite(period) ||
      !positive_finite(convection_speed)) {
    throw ValueError(fmt::format(
        "truth parameters must be positive (amplitude={}, wavelength={}, period={}, speed={})",
        amplitude, wavelength, period, convection_speed));
  }
}

void NoiseSpec::validate() const {
  if (!std::isfinite(eta) || eta < 0.0)
    throw ValueError(fmt::format("noise level must be finite and >= 0, got {}", eta));
}

SnapshotMatrix generate_truth(const TruthSpec& spec) {
  spec.validate();
  const FieldMeta& m = spec.meta;
  Eigen::MatrixXd data(m.state_size(), m.n_t);
  const auto field = spec.kind == TruthKind::traveling_wave ? traveling_wave : oscillating_wake;
  parallel_for(static_cast<std::size_t>(m.n_t), [&](std::size_t k) {
    const double t = static_cast<double>(k) * m.dt;
    for (Index c = 0; c < m.n_comp; ++c) {
      for (Index ix = 0; ix < m.n_x; ++ix) {
        for (Index iy = 0; iy < m.n_y; ++iy) {
          const double v = field(spec, c, static_cast<double>(ix), static_cast<double>(iy), t);
          for (Index iz = 0; iz < m.n_z; ++iz)
            data(m.flat_index(c, ix, iy, iz), static_cast<Index>(k)) = v;
        }
      }
    }
  });
  return SnapshotMatrix(m, std::move(data));
}

double global_std(const Eigen::MatrixXd& data) {
  if (data.size() == 0) return 0.0;
  const double mean = data.mean();
  return std::sqrt((data.array() - mean).square().mean());
}

namespace {

// Noise column k of the stream identified by `seed`, shared by add_noise and
// the row-subset path in make_twin_experiment.
void noise_column(std::uint64_t seed, Index k, Eigen::Ref<Eigen::VectorXd> out) {
  RandomEngine engine(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
  fill_standard_normal(engine, out);
}

}  // namespace

SnapshotMatrix add_noise(const SnapshotMatrix& snapshots, const NoiseSpec& spec) {
  spec.validate();
  const double sigma = spec.eta * global_std(snapshots.data());
  if (sigma == 0.0) return snapshots;
  Eigen::MatrixXd data = snapshots.data();
  parallel_for(static_cast<std::size_t>(data.cols()), [&](std::size_t k) {
    Eigen::VectorXd z(data.rows());
    noise_column(spec.seed, static_cast<Index>(k), z);
    data.col(static_cast<Index>(k)) += sigma * z;
  });
  return SnapshotMatrix(snapshots.meta(), std::move(data));
}

TwinExperiment make_twin_experiment(const SnapshotMatrix& truth, const SensorSet& ub_sensors,
                                    const SensorSet& w_sensors, const NoiseSpec& noise_ub,
                                    const NoiseSpec& noise_w, Index w_time_stride) {
  const Index j = truth.rows();
  if (ub_sensors.source_size() != j || w_sensors.source_size() != j)
    throw ShapeError(fmt::format("sensor sets index {} and {} rows, truth has {}",
                                 ub_sensors.source_size(), w_sensors.source_size(), j));
  if (w_time_stride < 1) throw ValueError("observation time stride must be >= 1");
  noise_w.validate();

  SnapshotMatrix background = add_noise(truth, noise_ub);
  ReducedSnapshotMatrix reduced = extract(background, ub_sensors, 1);

  // Only the observed rows of the noisy copy are kept; each column draws the
  // same full-length stream add_noise would.
  const double sigma_w = noise_w.eta * global_std(truth.data());
  ObservationSeries observations;
  Eigen::VectorXd z(j);
  for (Index k = 0; k < truth.cols(); k += w_time_stride) {
    Eigen::VectorXd w = w_sensors.select(truth.data().col(k));
    if (sigma_w != 0.0) {
      noise_column(noise_w.seed, k, z);
      for (Index i = 0; i < w_sensors.size(); ++i) w(i) += sigma_w * z(w_sensors[i]);
    }
    observations.emplace(k, std::move(w));
  }
  return TwinExperiment{std::move(background), std::move(reduced), std::move(observations),
                        w_sensors, w_time_stride};
}

}  // namespace lrenkf
