/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

// Command line front end: synth, assimilate, sweep and metrics.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lrenkf/error.hpp"
#include "lrenkf/experiment.hpp"
#include "lrenkf/metrics.hpp"
#include "lrenkf/snapshot_io.hpp"
#include "lrenkf/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

int fail(const std::string& kind, const std::string& message, int code = 1) {
  ordered_json j;
  j["status"] = "error";
  j["kind"] = kind;
  j["message"] = message;
  std::cout << j.dump(2) << std::endl;
  return code;
}

struct SynthOptions {
  std::string kind = "oscillating_wake";
  lrenkf::TruthSpec spec;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::string output;
};

struct AssimilateOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> output;
  std::optional<lrenkf::Index> repeats;
  bool no_timing = false;
};

struct SweepOptions {
  std::string config_dir;
  std::string output;
};

struct MetricsOptions {
  std::string reference;
  std::string estimate;
};

int run_synth(const SynthOptions& o) {
  lrenkf::TruthSpec spec = o.spec;
  spec.kind = lrenkf::parse_truth_kind(o.kind);
  lrenkf::SnapshotMatrix truth = lrenkf::generate_truth(spec);
  if (o.eta > 0.0) truth = lrenkf::add_noise(truth, lrenkf::NoiseSpec{o.eta, o.seed});
  lrenkf::write_snapshots(fs::path(o.output), truth);
  ordered_json j;
  j["status"] = "ok";
  j["output"] = o.output;
  j["rows"] = truth.rows();
  j["cols"] = truth.cols();
  j["sigma_t"] = lrenkf::global_std(truth.data());
  std::cout << j.dump(2) << std::endl;
  return 0;
}

int run_assimilate(const AssimilateOptions& o) {
  lrenkf::ExperimentConfig c = lrenkf::load_experiment_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.mode) c.mode = lrenkf::parse_run_mode(*o.mode);
  if (o.repeats) c.repeats = *o.repeats;
  if (o.no_timing) c.timing = false;
  if (o.output) c.output_dir = *o.output;
  if (c.output_dir.empty()) c.output_dir = fs::path(c.label);
  const lrenkf::ExperimentOutcome outcome = lrenkf::run_experiment(c);
  std::cout << outcome.report.json() << std::endl;
  return 0;
}

int run_sweep(const SweepOptions& o) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(o.config_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ini") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw lrenkf::ValueError("no .ini configs in " + o.config_dir);

  const fs::path table(o.output);
  const fs::path base = table.has_parent_path() ? table.parent_path() : fs::path(".");
  // Unparseable configs still get a row, so they go through run_sweep as an
  // invalid config carrying the parse error as its label.
  std::vector<lrenkf::ExperimentConfig> configs;
  std::vector<std::optional<std::string>> parse_errors;
  for (const fs::path& f : files) {
    try {
      lrenkf::ExperimentConfig c = lrenkf::load_experiment_config(f);
      if (c.output_dir.empty()) c.output_dir = base / c.label;
      configs.push_back(std::move(c));
      parse_errors.emplace_back();
    } catch (const std::exception& e) {
      lrenkf::ExperimentConfig c;
      c.label = f.stem().string();
      configs.push_back(std::move(c));
      parse_errors.emplace_back(e.what());
    }
  }

  std::vector<lrenkf::SweepRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (parse_errors[i]) {
      rows.push_back(lrenkf::SweepRow{configs[i], std::nullopt, *parse_errors[i]});
    } else {
      auto one = lrenkf::run_sweep({configs[i]});
      rows.push_back(std::move(one.front()));
    }
  }

  if (table.has_parent_path()) fs::create_directories(table.parent_path());
  std::ofstream out(table, std::ios::binary);
  if (!out) throw lrenkf::FormatError("cannot open " + table.string() + " for writing");
  out << lrenkf::sweep_table(rows);
  if (!out) throw lrenkf::FormatError("write to " + table.string() + " failed");

  ordered_json j;
  j["status"] = "ok";
  j["output"] = table.string();
  j["cases"] = rows.size();
  j["failed"] = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.report; });
  std::cout << j.dump(2) << std::endl;
  return 0;
}

int run_metrics(const MetricsOptions& o) {
  const lrenkf::SnapshotMatrix ref = lrenkf::read_snapshots(fs::path(o.reference));
  const lrenkf::SnapshotMatrix est = lrenkf::read_snapshots(fs::path(o.estimate));
  if (!(ref.meta() == est.meta())) throw lrenkf::ShapeError("the two files have different field metadata");
  const double m = lrenkf::mae(ref.data(), est.data());
  const double sigma = lrenkf::global_std(ref.data());
  ordered_json j;
  j["rrmse"] = lrenkf::rrmse(ref.data(), est.data());
  j["mae"] = m;
  j["mae_pct"] = sigma > 0.0 ? ordered_json(m / sigma) : ordered_json(nullptr);
  std::cout << j.dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank ensemble Kalman filter twin experiments"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic truth field as SNP1");
  synth_cmd->add_option("--kind", synth.kind, "traveling_wave or oscillating_wake")->capture_default_str();
  synth_cmd->add_option("--n-comp", synth.spec.meta.n_comp)->capture_default_str();
  synth_cmd->add_option("--nx", synth.spec.meta.n_x)->capture_default_str();
  synth_cmd->add_option("--ny", synth.spec.meta.n_y)->capture_default_str();
  synth_cmd->add_option("--nz", synth.spec.meta.n_z)->capture_default_str();
  synth_cmd->add_option("--nt", synth.spec.meta.n_t)->capture_default_str();
  synth_cmd->add_option("--dt", synth.spec.meta.dt)->capture_default_str();
  synth_cmd->add_option("--amplitude", synth.spec.amplitude)->capture_default_str();
  synth_cmd->add_option("--wavelength", synth.spec.wavelength)->capture_default_str();
  synth_cmd->add_option("--period", synth.spec.period)->capture_default_str();
  synth_cmd->add_option("--speed", synth.spec.convection_speed, "Convection speed")->capture_default_str();
  synth_cmd->add_option("--eta", synth.eta, "Noise level added to the field")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Noise seed")->capture_default_str();
  synth_cmd->add_option("--output", synth.output, "SNP1 output path")->required();

  AssimilateOptions assim;
  auto* assim_cmd = app.add_subcommand("assimilate", "Run one twin experiment");
  assim_cmd->add_option("--config", assim.config, "Experiment INI file")->required()->check(CLI::ExistingFile);
  assim_cmd->add_option("--seed", assim.seed, "Override the experiment seed");
  assim_cmd->add_option("--mode", assim.mode, "Override the mode (hr or lr)");
  assim_cmd->add_option("--output", assim.output, "Artifact directory");
  assim_cmd->add_option("--repeats", assim.repeats, "Timing repeats");
  assim_cmd->add_flag("--no-timing", assim.no_timing, "Do not time the run (t_comp_s = 0)");

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run every *.ini in a directory");
  sweep_cmd->add_option("--config-dir", sweep.config_dir)->required()->check(CLI::ExistingDirectory);
  sweep_cmd->add_option("--output", sweep.output, "Aggregated CSV table")->required();

  MetricsOptions metrics;
  auto* metrics_cmd = app.add_subcommand("metrics", "RRMSE and MAE between two SNP1 files");
  metrics_cmd->add_option("reference", metrics.reference)->required()->check(CLI::ExistingFile);
  metrics_cmd->add_option("estimate", metrics.estimate)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*assim_cmd) return run_assimilate(assim);
    if (*sweep_cmd) return run_sweep(sweep);
    if (*metrics_cmd) return run_metrics(metrics);
  } catch (const lrenkf::Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return fail("usage", "no subcommand");
}
