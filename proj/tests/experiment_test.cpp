/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "lrenkf/error.hpp"
#include "lrenkf/experiment.hpp"
#include "lrenkf/snapshot_io.hpp"

using namespace lrenkf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lrenkf_experiment_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig small_case(const fs::path& out) {
  ExperimentConfig c;
  c.label = "small";
  c.truth.kind = TruthKind::oscillating_wake;
  c.truth.meta = FieldMeta{2, 16, 8, 1, 31, 0.1};
  c.truth.wavelength = 4.0;
  c.noise_eta_ub = 0.05;
  c.noise_eta_w = 0.05;
  c.seed = 3;
  c.repeats = 1;
  c.timing = false;
  c.output_dir = out;
  c.enkf.ensemble_size = 10;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const fs::path& dir, const std::string& args, std::string* output = nullptr) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = std::string(LRENKF_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) *output = slurp(log);
  return WEXITSTATUS(status);
}

}  // namespace

TEST(ExperimentConfig, ParsesAllSections) {
  std::istringstream in(R"(
[experiment]
label = wake_lr
mode = lr
ub_compression = 4
w_compression = 8
w_time_stride = 3
noise_eta_ub = 0.1
noise_eta_w = 0.02
seed = 99
repeats = 2
timing = false
hr_reference = true
tracking = 0:1:2:0; 1:3:4:0

[truth]
kind = traveling_wave
n_comp = 1
n_x = 10
n_y = 5
n_t = 20
dt = 0.05
amplitude = 2
period = 1.5

[enkf]
ensemble_size = 45
init_spread = 0.3
obs_variance = auto
anomaly_retention = 0.5

[truncation]
policy = rank
value = 7
)");
  ExperimentConfig c = parse_experiment_config(in);
  EXPECT_EQ(c.label, "wake_lr");
  EXPECT_EQ(c.mode, RunMode::lr);
  EXPECT_EQ(c.ub_compression, 4.0);
  EXPECT_EQ(c.w_compression, 8.0);
  EXPECT_EQ(c.w_time_stride, 3);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.repeats, 2);
  EXPECT_FALSE(c.timing);
  EXPECT_TRUE(c.hr_reference);
  ASSERT_EQ(c.tracking.size(), 2u);
  EXPECT_EQ(c.tracking[1].iy, 4);
  EXPECT_EQ(c.truth.kind, TruthKind::traveling_wave);
  EXPECT_EQ(c.truth.meta.n_t, 20);
  EXPECT_EQ(c.truth.amplitude, 2.0);
  EXPECT_EQ(c.enkf.ensemble_size, 45);
  EXPECT_EQ(c.init_spread, 0.3);
  EXPECT_FALSE(c.obs_variance.has_value());
  EXPECT_EQ(c.enkf.anomaly_retention, 0.5);
  EXPECT_EQ(c.truncation.kind(), TruncationPolicy::Kind::fixed_rank);
  EXPECT_EQ(c.truncation.rank_value(), 7);
}

TEST(ExperimentConfig, DefaultsAndRejections) {
  std::istringstream empty("");
  ExperimentConfig d = parse_experiment_config(empty);
  EXPECT_EQ(d.repeats, 10);
  EXPECT_EQ(d.mode, RunMode::hr);
  EXPECT_EQ(d.truncation.kind(), TruncationPolicy::Kind::fraction_of_min_dim);
  EXPECT_EQ(d.truncation.fraction_value(), 0.2);

  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_experiment_config(in);
  };
  EXPECT_THROW(parse("[experiment]\nmode = mid\n"), ValueError);
  EXPECT_THROW(parse("[experiment]\nub_compression = 0.5\n"), ValueError);
  EXPECT_THROW(parse("[experiment]\nrepeats = 0\n"), ValueError);
  EXPECT_THROW(parse("[experiment]\nseed = 1x\n"), ValueError);
  EXPECT_THROW(parse("[experiment]\ncolour = red\n"), ValueError);
  EXPECT_THROW(parse("[extra]\nkey = 1\n"), ValueError);
  EXPECT_THROW(parse("[truncation]\npolicy = rank\n"), ValueError);
  EXPECT_THROW(parse("[experiment]\ntracking = 1:2:3\n"), ValueError);
  EXPECT_THROW(parse("[experiment\n"), FormatError);
}

TEST(RunExperiment, NoiselessHrRecoversTruth) {
  ExperimentConfig c = small_case(scratch("noiseless"));
  c.noise_eta_ub = 0.0;
  c.noise_eta_w = 0.0;
  ExperimentOutcome o = run_experiment(c);
  EXPECT_LE(o.report.rrmse, 1e-4);
  for (const char* f : {"report.csv", "report.json", "tracking.csv", "estimate.snp"})
    EXPECT_TRUE(fs::exists(c.output_dir / f)) << f;
}

TEST(RunExperiment, LrWithoutReductionMatchesHr) {
  ExperimentConfig hr = small_case(scratch("parity_hr"));
  ExperimentConfig lr = small_case(scratch("parity_lr"));
  lr.mode = RunMode::lr;
  lr.ub_compression = 1.0;
  lr.truncation = TruncationPolicy::tolerance(0.0);
  const MetricsReport a = run_experiment(hr).report;
  const MetricsReport b = run_experiment(lr).report;
  EXPECT_NEAR(b.rrmse, a.rrmse, 1e-6 * a.rrmse);
  EXPECT_NEAR(b.mae, a.mae, 1e-6 * a.mae);
  const SnapshotMatrix ea = read_snapshots(hr.output_dir / "estimate.snp");
  const SnapshotMatrix eb = read_snapshots(lr.output_dir / "estimate.snp");
  EXPECT_LE((ea.data() - eb.data()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(RunExperiment, ReportFilesAgree) {
  ExperimentConfig c = small_case(scratch("files"));
  c.mode = RunMode::lr;
  c.ub_compression = 4.0;
  c.hr_reference = true;
  c.tracking = {GridPoint{0, 3, 4, 0}, GridPoint{1, 15, 7, 0}};
  ExperimentOutcome o = run_experiment(c);
  EXPECT_EQ(slurp(c.output_dir / "report.csv"),
            MetricsReport::csv_header() + "\n" + o.report.csv_row() + "\n");
  const auto j = nlohmann::json::parse(slurp(c.output_dir / "report.json"));
  EXPECT_EQ(j["rrmse"].get<double>(), o.report.rrmse);
  EXPECT_EQ(j["cr_ub"].get<double>(), 4.0);
  EXPECT_TRUE(j["speedup"].is_null());
  EXPECT_GT(j["ram_compression"].get<double>(), 0.0);
  EXPECT_EQ(o.state_size, 64);

  std::istringstream tracking(slurp(c.output_dir / "tracking.csv"));
  std::string header;
  std::getline(tracking, header);
  EXPECT_EQ(header, "k,t,truth_c0_x3_y4_z0,estimate_c0_x3_y4_z0,truth_c1_x15_y7_z0,estimate_c1_x15_y7_z0");
  int lines = 0;
  for (std::string line; std::getline(tracking, line);) ++lines;
  EXPECT_EQ(lines, 31);
}

TEST(RunExperiment, PeakBytesShrinkWithCompression) {
  std::size_t previous = SIZE_MAX;
  for (double cr : {4.0, 16.0, 64.0}) {
    ExperimentConfig c = small_case(scratch("peak"));
    c.truth.meta = FieldMeta{2, 64, 32, 1, 31, 0.1};
    c.mode = RunMode::lr;
    c.ub_compression = cr;
    c.write_estimate = false;
    const std::size_t peak = run_experiment(c).report.peak_bytes;
    EXPECT_LE(peak, previous) << cr;
    previous = peak;
  }
}

TEST(RunSweep, FailingCaseDoesNotStopTheSweep) {
  ExperimentConfig ok = small_case(scratch("sweep_ok"));
  ExperimentConfig broken = small_case(scratch("sweep_bad"));
  broken.label = "broken";
  broken.truth_file = "/nonexistent/truth.snp";
  ExperimentConfig second = small_case(scratch("sweep_ok2"));
  second.label = "second";
  auto rows = run_sweep({ok, broken, second});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(rows[0].report.has_value());
  EXPECT_FALSE(rows[1].report.has_value());
  EXPECT_TRUE(rows[2].report.has_value());
  const std::string table = sweep_table(rows);
  std::istringstream lines(table);
  std::string header, a, b, c;
  std::getline(lines, header);
  std::getline(lines, a);
  std::getline(lines, b);
  std::getline(lines, c);
  EXPECT_EQ(header, MetricsReport::csv_header() + ",status,message");
  EXPECT_EQ(a, rows[0].report->csv_row() + ",ok,");
  EXPECT_EQ(b.rfind("broken,", 0), 0u);
  EXPECT_NE(b.find(",error,"), std::string::npos);
  EXPECT_EQ(c.rfind("second,", 0), 0u);
  EXPECT_THROW(run_sweep({}), ValueError);
}

TEST(RunSweep, SingleConfigMatchesRunExperiment) {
  ExperimentConfig c = small_case(scratch("single"));
  auto rows = run_sweep({c});
  ASSERT_TRUE(rows[0].report.has_value());
  EXPECT_EQ(rows[0].report->csv_row(), run_experiment(c).report.csv_row());
}

TEST(Cli, AssimilateAndErrorJson) {
  const fs::path dir = scratch("cli");
  {
    std::ofstream cfg(dir / "case.ini");
    cfg << "[experiment]\nlabel = cli\nrepeats = 1\n[truth]\nn_comp = 2\nn_x = 16\nn_y = 8\nn_t = 21\n"
           "[enkf]\nensemble_size = 8\n";
  }
  std::string out;
  EXPECT_EQ(run_cli(dir, "assimilate --config " + (dir / "case.ini").string() + " --output " +
                        (dir / "out").string() + " --no-timing --seed 4",
                    &out),
            0)
      << out;
  EXPECT_TRUE(fs::exists(dir / "out" / "estimate.snp"));
  EXPECT_EQ(nlohmann::json::parse(out)["t_comp_s"].get<double>(), 0.0);

  {
    std::ofstream bad(dir / "bad.ini");
    bad << "[experiment]\nmode = sideways\n";
  }
  EXPECT_NE(run_cli(dir, "assimilate --config " + (dir / "bad.ini").string(), &out), 0);
  const auto err = nlohmann::json::parse(out);
  EXPECT_EQ(err["status"], "error");
  EXPECT_EQ(err["kind"], "value");

  EXPECT_EQ(run_cli(dir, "metrics " + (dir / "out" / "estimate.snp").string() + " " +
                        (dir / "out" / "estimate.snp").string(),
                    &out),
            0);
  EXPECT_EQ(nlohmann::json::parse(out)["rrmse"].get<double>(), 0.0);
}

TEST(Cli, SynthAndSweep) {
  const fs::path dir = scratch("cli_sweep");
  std::string out;
  ASSERT_EQ(run_cli(dir, "synth --kind traveling_wave --nx 12 --ny 6 --nt 15 --output " +
                        (dir / "truth.snp").string(),
                    &out),
            0)
      << out;
  EXPECT_EQ(read_snapshots(dir / "truth.snp").rows(), 72);

  fs::create_directories(dir / "configs");
  {
    std::ofstream a(dir / "configs" / "a.ini");
    a << "[experiment]\nlabel = from_file\nrepeats = 1\ntiming = false\n[truth]\nfile = ../truth.snp\n"
         "[enkf]\nensemble_size = 6\n";
    std::ofstream b(dir / "configs" / "b.ini");
    b << "[experiment]\nlabel = broken\nmode = nope\n";
  }
  ASSERT_EQ(run_cli(dir, "sweep --config-dir " + (dir / "configs").string() + " --output " +
                        (dir / "table.csv").string(),
                    &out),
            0)
      << out;
  const std::string table = slurp(dir / "table.csv");
  EXPECT_NE(table.find("from_file,"), std::string::npos);
  EXPECT_NE(table.find("b,0.05,1,1,,,,,,,error,"), std::string::npos) << table;
  EXPECT_TRUE(fs::exists(dir / "from_file" / "report.csv"));
}
