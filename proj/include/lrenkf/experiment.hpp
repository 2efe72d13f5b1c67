/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lrenkf/enkf.hpp"
#include "lrenkf/lcsvd.hpp"
#include "lrenkf/metrics.hpp"
#include "lrenkf/synth.hpp"

namespace lrenkf {

enum class RunMode { hr, lr };

std::string to_string(RunMode mode);
RunMode parse_run_mode(const std::string& name);

/// One twin experiment. Read from an INI file with the sections [experiment],
/// [truth], [enkf] and [truncation]; see configs/ for annotated examples.
struct ExperimentConfig {
  std::string label = "case";
  RunMode mode = RunMode::hr;
  /// SNP1 file with the truth. When empty the truth is generated from `truth`.
  std::filesystem::path truth_file;
  TruthSpec truth;
  double ub_compression = 1.0;
  double w_compression = 1.0;
  Index w_time_stride = 1;
  double noise_eta_ub = 0.05;
  double noise_eta_w = 0.05;
  std::uint64_t seed = 0;
  /// Ensemble settings. Its seed is derived from `seed`; its init_spread is
  /// replaced by the automatic value unless `init_spread` is set.
  EnKFConfig enkf;
  std::optional<double> init_spread;
  /// Observation noise variance; defaults to (noise_eta_w * sigma_T)^2.
  std::optional<double> obs_variance;
  TruncationPolicy truncation = TruncationPolicy::fraction_of_min_dim(0.2);
  /// Artifact directory; empty means the caller decides.
  std::filesystem::path output_dir;
  Index repeats = 10;
  /// When false no clock is read and t_comp_s is reported as 0.
  bool timing = true;
  /// In lr mode, also run the hr pipeline to fill speedup and ram_compression.
  bool hr_reference = false;
  bool write_estimate = true;
  std::vector<GridPoint> tracking;

  void validate() const;
};

ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// "c:ix:iy:iz;c:ix:iy:iz"
std::vector<GridPoint> parse_tracking_points(const std::string& text);

struct ExperimentOutcome {
  MetricsReport report;
  /// RRMSE of the noisy full background against the truth.
  double background_rrmse = 0.0;
  /// Assimilated state length (J for hr, J_bar for lr) and observations per step.
  Index state_size = 0;
  Index observation_size = 0;
  /// Retained modes of the lr reconstruction; 0 in hr mode.
  Index modes = 0;
};

/// Runs the twin experiment and writes report.csv, report.json, tracking.csv
/// and (optionally) estimate.snp into config.output_dir.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

struct SweepRow {
  ExperimentConfig config;
  std::optional<MetricsReport> report;
  std::string message;
};

/// Runs every config in order. A failing case becomes a row with status "error".
std::vector<SweepRow> run_sweep(const std::vector<ExperimentConfig>& configs);

/// Report header plus ",status,message", one line per row.
std::string sweep_table(const std::vector<SweepRow>& rows);

}  // namespace lrenkf
