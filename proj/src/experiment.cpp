/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "lrenkf/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "lrenkf/error.hpp"
#include "lrenkf/random.hpp"
#include "lrenkf/snapshot_io.hpp"

namespace lrenkf {

namespace {

// Stream tags separating the background noise, observation noise and filter
// draws of one experiment seed.
constexpr std::uint64_t kBackgroundNoiseTag = 0x75B;
constexpr std::uint64_t kObservationNoiseTag = 0x77;
constexpr std::uint64_t kFilterTag = 0xE4;

// Lower bound on the noise level used for the automatic spread and R, so a
// noise-free run still has a nonsingular innovation covariance.
constexpr double kMinNoiseLevel = 1e-6;

// ---- config parsing -------------------------------------------------------

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& raw, const std::string& key) {
  const std::string text = trim(raw);
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end)
    throw ValueError(fmt::format("{}: cannot parse '{}' as a number", key, raw));
  return value;
}

bool parse_bool(const std::string& raw, const std::string& key) {
  const std::string text = trim(raw);
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  throw ValueError(fmt::format("{}: expected true or false, got '{}'", key, raw));
}

// "auto" or a number.
std::optional<double> parse_auto(const std::string& raw, const std::string& key) {
  if (trim(raw) == "auto") return std::nullopt;
  return parse_number<double>(raw, key);
}

TruncationPolicy parse_truncation(const std::string& policy, const std::string& value) {
  const std::string p = trim(policy);
  if (p == "fraction") return TruncationPolicy::fraction_of_min_dim(parse_number<double>(value, "truncation.value"));
  if (p == "rank") return TruncationPolicy::fixed_rank(parse_number<Index>(value, "truncation.value"));
  if (p == "tolerance") return TruncationPolicy::tolerance(parse_number<double>(value, "truncation.value"));
  throw ValueError(fmt::format("truncation.policy: unknown policy '{}'", policy));
}

using Section = std::map<std::string, std::string>;

std::map<std::string, Section> read_sections(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw FormatError(fmt::format("config: {}", e.what()));
  }
  static const std::set<std::string> known{"experiment", "truth", "enkf", "truncation"};
  std::map<std::string, Section> out;
  for (const auto& [name, section] : tree) {
    if (!known.count(name)) throw ValueError(fmt::format("config: unknown section [{}]", name));
    for (const auto& [key, value] : section) out[name][key] = value.data();
  }
  return out;
}

// Hands out values of one section and rejects keys nobody asked for.
class SectionReader {
 public:
  SectionReader(std::string name, Section values) : name_(std::move(name)), values_(std::move(values)) {}

  std::optional<std::string> take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    std::string v = it->second;
    values_.erase(it);
    return v;
  }
  std::string key(const std::string& k) const { return name_ + "." + k; }

  void finish() const {
    if (!values_.empty())
      throw ValueError(fmt::format("config: unknown key {}.{}", name_, values_.begin()->first));
  }

 private:
  std::string name_;
  Section values_;
};

// ---- pipeline ---------------------------------------------------------------

struct LrObservationMap {
  SensorSet sensors;                 // over the reduced state
  std::vector<Index> w_positions;    // kept entries of each observation vector
};

// Maps every observed row to the nearest background sensor row. When several
// observations land on one row the closest wins, ties going to the first.
LrObservationMap map_observations(const SensorSet& ub, const SensorSet& w) {
  const auto& rows = ub.indices();
  std::map<Index, std::pair<Index, Index>> best;  // reduced row -> (distance, w position)
  for (Index i = 0; i < w.size(); ++i) {
    const Index x = w[i];
    auto it = std::lower_bound(rows.begin(), rows.end(), x);
    Index p = static_cast<Index>(it - rows.begin());
    if (p == ub.size() || (p > 0 && x - rows[p - 1] <= rows[p] - x)) --p;
    const Index d = std::abs(rows[p] - x);
    auto [slot, inserted] = best.emplace(p, std::make_pair(d, i));
    if (!inserted && d < slot->second.first) slot->second = {d, i};
  }
  std::vector<Index> reduced_rows;
  std::vector<Index> positions;
  for (const auto& [p, entry] : best) {
    reduced_rows.push_back(p);
    positions.push_back(entry.second);
  }
  return {SensorSet(std::move(reduced_rows), ub.size()), std::move(positions)};
}

struct RunEstimate {
  Eigen::MatrixXd dense;     // hr
  SVDFactors factors;        // lr
  bool factored = false;
  double wall_time_s = 0.0;
  std::size_t peak_bytes = 0;
  Index state_size = 0;
  Index observation_size = 0;

  Index rows() const { return factored ? factors.rows() : dense.rows(); }
  Eigen::VectorXd column(Index k) const { return factored ? factors.column(k) : Eigen::VectorXd(dense.col(k)); }
  Eigen::VectorXd row(Index r) const {
    if (!factored) return dense.row(r).transpose();
    return factors.coefficients * factors.modes.row(r).transpose().cwiseProduct(factors.singular_values);
  }
};

struct Prepared {
  SnapshotMatrix truth;
  TwinExperiment twin;
  double sigma_t = 0.0;
};

double noise_scale(double sigma_t) { return sigma_t > 0.0 ? sigma_t : 1.0; }

EnKFConfig filter_config(const ExperimentConfig& c, double sigma_t, Index state_size) {
  EnKFConfig e = c.enkf;
  e.seed = derive_seed(c.seed, {kFilterTag});
  if (c.init_spread) {
    e.init_spread = *c.init_spread;
  } else {
    // Scaled so that the E-1 directions spanned by the ensemble each carry
    // the variance of an eta-level background error.
    const double level = std::max(c.noise_eta_ub, kMinNoiseLevel) * noise_scale(sigma_t);
    e.init_spread = level * std::sqrt(static_cast<double>(e.ensemble_size - 1) /
                                      static_cast<double>(state_size));
  }
  return e;
}

double observation_variance(const ExperimentConfig& c, double sigma_t) {
  if (c.obs_variance) return *c.obs_variance;
  const double level = std::max(c.noise_eta_w, kMinNoiseLevel) * noise_scale(sigma_t);
  return level * level;
}

template <typename Fn>
auto timed(const ExperimentConfig& c, Fn&& fn) {
  using Clock = std::chrono::steady_clock;
  if (!c.timing) return std::make_pair(fn(), 0.0);
  double total = 0.0;
  auto t0 = Clock::now();
  auto first = fn();
  total += std::chrono::duration<double>(Clock::now() - t0).count();
  for (Index r = 1; r < c.repeats; ++r) {
    t0 = Clock::now();
    fn();
    total += std::chrono::duration<double>(Clock::now() - t0).count();
  }
  return std::make_pair(std::move(first), total / static_cast<double>(c.repeats));
}

RunEstimate run_hr(const ExperimentConfig& c, const Prepared& p) {
  const Index j = p.truth.rows();
  const ObservationModel obs = ObservationModel::with_uniform_noise(
      p.twin.w_sensors, observation_variance(c, p.sigma_t));
  const EnKFConfig filter = filter_config(c, p.sigma_t, j);
  auto [result, seconds] = timed(c, [&] {
    return assimilate_window(p.twin.background_full, p.twin.observations, obs, filter);
  });
  RunEstimate est;
  est.dense = std::move(result.analysis);
  est.wall_time_s = seconds;
  est.peak_bytes = result.peak_state_bytes;
  est.state_size = j;
  est.observation_size = obs.observation_size();
  return est;
}

RunEstimate run_lr(const ExperimentConfig& c, const Prepared& p) {
  const ReducedSnapshotMatrix& reduced_bg = p.twin.background_reduced;
  const Index jbar = reduced_bg.data.rows();
  const LrObservationMap map = map_observations(reduced_bg.sensors, p.twin.w_sensors);
  ObservationSeries lr_obs;
  for (const auto& [k, w] : p.twin.observations) {
    Eigen::VectorXd v(static_cast<Index>(map.w_positions.size()));
    for (std::size_t i = 0; i < map.w_positions.size(); ++i) v(static_cast<Index>(i)) = w(map.w_positions[i]);
    lr_obs.emplace(k, std::move(v));
  }
  const ObservationModel obs =
      ObservationModel::with_uniform_noise(map.sensors, observation_variance(c, p.sigma_t));
  const EnKFConfig filter = filter_config(c, p.sigma_t, jbar);

  struct LrRun {
    AssimilationResult assimilation;
    LcsvdFactors factors;
  };
  auto [run, seconds] = timed(c, [&] {
    LrRun r;
    r.assimilation = assimilate_window(reduced_bg, lr_obs, obs, filter);
    ReducedSnapshotMatrix assimilated{reduced_bg.parent_meta, reduced_bg.sensors, 1,
                                      std::move(r.assimilation.analysis)};
    r.factors = lcsvd_factorize_overlay(assimilated, p.twin.background_full.data(), c.truncation);
    return r;
  });

  RunEstimate est;
  est.factored = true;
  est.factors = std::move(run.factors.recovered);
  est.wall_time_s = seconds;
  const Index k = p.truth.cols();
  const std::size_t lift = sizeof(double) * static_cast<std::size_t>(jbar * k + k) +
                           lcsvd_footprint_bytes(p.truth.rows(), jbar, k, k, est.factors.rank());
  est.peak_bytes = std::max(run.assimilation.peak_state_bytes, lift);
  est.state_size = jbar;
  est.observation_size = obs.observation_size();
  return est;
}

Prepared prepare(const ExperimentConfig& c) {
  SnapshotMatrix truth =
      c.truth_file.empty() ? generate_truth(c.truth) : read_snapshots(c.truth_file);
  const Index j = truth.rows();
  const SensorSet ub_sensors = c.mode == RunMode::lr
                                   ? uniform_sensor_set(j, sensor_count_for_rate(j, c.ub_compression))
                                   : SensorSet::full(j);
  const SensorSet w_sensors = uniform_sensor_set(j, sensor_count_for_rate(j, c.w_compression));
  const NoiseSpec noise_ub{c.noise_eta_ub, derive_seed(c.seed, {kBackgroundNoiseTag})};
  const NoiseSpec noise_w{c.noise_eta_w, derive_seed(c.seed, {kObservationNoiseTag})};
  TwinExperiment twin =
      make_twin_experiment(truth, ub_sensors, w_sensors, noise_ub, noise_w, c.w_time_stride);
  const double sigma_t = global_std(truth.data());
  return Prepared{std::move(truth), std::move(twin), sigma_t};
}

// ---- artifacts ----------------------------------------------------------------

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(fmt::format("cannot open {} for writing", path.string()));
  out << text;
  if (!out) throw FormatError(fmt::format("write to {} failed", path.string()));
}

std::string tracking_csv(const Prepared& p, const RunEstimate& est,
                         const std::vector<GridPoint>& points) {
  const FieldMeta& meta = p.truth.meta();
  std::string out = "k,t";
  std::vector<Eigen::VectorXd> truth_rows, est_rows;
  for (const GridPoint& g : points) {
    const std::string tag = fmt::format("c{}_x{}_y{}_z{}", g.comp, g.ix, g.iy, g.iz);
    out += fmt::format(",truth_{},estimate_{}", tag, tag);
    truth_rows.push_back(tracking_series(p.truth, g));
    est_rows.push_back(est.row(meta.flat_index(g.comp, g.ix, g.iy, g.iz)));
  }
  out += '\n';
  for (Index k = 0; k < meta.n_t; ++k) {
    out += fmt::format("{},{:.12g}", k, static_cast<double>(k) * meta.dt);
    for (std::size_t i = 0; i < points.size(); ++i)
      out += fmt::format(",{:.12g},{:.12g}", truth_rows[i](k), est_rows[i](k));
    out += '\n';
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

}  // namespace

std::string to_string(RunMode mode) { return mode == RunMode::hr ? "hr" : "lr"; }

RunMode parse_run_mode(const std::string& name) {
  const std::string t = trim(name);
  if (t == "hr") return RunMode::hr;
  if (t == "lr") return RunMode::lr;
  throw ValueError(fmt::format("mode must be hr or lr, got '{}'", name));
}

std::vector<GridPoint> parse_tracking_points(const std::string& text) {
  std::vector<GridPoint> points;
  std::stringstream list(text);
  std::string item;
  while (std::getline(list, item, ';')) {
    if (trim(item).empty()) continue;
    std::stringstream parts(item);
    std::string field;
    std::vector<Index> v;
    while (std::getline(parts, field, ':')) v.push_back(parse_number<Index>(field, "experiment.tracking"));
    if (v.size() != 4)
      throw ValueError(fmt::format("experiment.tracking: '{}' is not c:ix:iy:iz", trim(item)));
    points.push_back(GridPoint{v[0], v[1], v[2], v[3]});
  }
  return points;
}

void ExperimentConfig::validate() const {
  if (label.empty() || label.find_first_of(",\"\n") != std::string::npos)
    throw ValueError(fmt::format("label '{}' must be nonempty without commas or quotes", label));
  if (truth_file.empty()) truth.validate();
  if (!(ub_compression >= 1.0) || !(w_compression >= 1.0))
    throw ValueError("compression rates must be >= 1");
  if (w_time_stride < 1) throw ValueError("w_time_stride must be >= 1");
  if (!(noise_eta_ub >= 0.0) || !(noise_eta_w >= 0.0)) throw ValueError("noise levels must be >= 0");
  if (repeats < 1) throw ValueError("repeats must be >= 1");
  if (init_spread && !(*init_spread >= 0.0)) throw ValueError("init_spread must be >= 0");
  if (obs_variance && !(*obs_variance >= 0.0)) throw ValueError("obs_variance must be >= 0");
  EnKFConfig e = enkf;
  e.init_spread = 0.0;
  e.validate();
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  auto sections = read_sections(in);
  ExperimentConfig c;

  SectionReader ex("experiment", sections["experiment"]);
  if (auto v = ex.take("label")) c.label = trim(*v);
  if (auto v = ex.take("mode")) c.mode = parse_run_mode(*v);
  if (auto v = ex.take("ub_compression")) c.ub_compression = parse_number<double>(*v, ex.key("ub_compression"));
  if (auto v = ex.take("w_compression")) c.w_compression = parse_number<double>(*v, ex.key("w_compression"));
  if (auto v = ex.take("w_time_stride")) c.w_time_stride = parse_number<Index>(*v, ex.key("w_time_stride"));
  if (auto v = ex.take("noise_eta_ub")) c.noise_eta_ub = parse_number<double>(*v, ex.key("noise_eta_ub"));
  if (auto v = ex.take("noise_eta_w")) c.noise_eta_w = parse_number<double>(*v, ex.key("noise_eta_w"));
  if (auto v = ex.take("seed")) c.seed = parse_number<std::uint64_t>(*v, ex.key("seed"));
  if (auto v = ex.take("repeats")) c.repeats = parse_number<Index>(*v, ex.key("repeats"));
  if (auto v = ex.take("timing")) c.timing = parse_bool(*v, ex.key("timing"));
  if (auto v = ex.take("hr_reference")) c.hr_reference = parse_bool(*v, ex.key("hr_reference"));
  if (auto v = ex.take("write_estimate")) c.write_estimate = parse_bool(*v, ex.key("write_estimate"));
  if (auto v = ex.take("output_dir")) c.output_dir = trim(*v);
  if (auto v = ex.take("tracking")) c.tracking = parse_tracking_points(*v);
  ex.finish();

  SectionReader tr("truth", sections["truth"]);
  if (auto v = tr.take("file")) c.truth_file = trim(*v);
  if (auto v = tr.take("kind")) c.truth.kind = parse_truth_kind(trim(*v));
  FieldMeta& m = c.truth.meta;
  if (auto v = tr.take("n_comp")) m.n_comp = parse_number<Index>(*v, tr.key("n_comp"));
  if (auto v = tr.take("n_x")) m.n_x = parse_number<Index>(*v, tr.key("n_x"));
  if (auto v = tr.take("n_y")) m.n_y = parse_number<Index>(*v, tr.key("n_y"));
  if (auto v = tr.take("n_z")) m.n_z = parse_number<Index>(*v, tr.key("n_z"));
  if (auto v = tr.take("n_t")) m.n_t = parse_number<Index>(*v, tr.key("n_t"));
  if (auto v = tr.take("dt")) m.dt = parse_number<double>(*v, tr.key("dt"));
  if (auto v = tr.take("amplitude")) c.truth.amplitude = parse_number<double>(*v, tr.key("amplitude"));
  if (auto v = tr.take("wavelength")) c.truth.wavelength = parse_number<double>(*v, tr.key("wavelength"));
  if (auto v = tr.take("period")) c.truth.period = parse_number<double>(*v, tr.key("period"));
  if (auto v = tr.take("convection_speed"))
    c.truth.convection_speed = parse_number<double>(*v, tr.key("convection_speed"));
  tr.finish();

  SectionReader en("enkf", sections["enkf"]);
  if (auto v = en.take("ensemble_size")) c.enkf.ensemble_size = parse_number<Index>(*v, en.key("ensemble_size"));
  if (auto v = en.take("init_spread")) c.init_spread = parse_auto(*v, en.key("init_spread"));
  if (auto v = en.take("process_noise_std"))
    c.enkf.process_noise_std = parse_number<double>(*v, en.key("process_noise_std"));
  if (auto v = en.take("anomaly_retention"))
    c.enkf.anomaly_retention = parse_number<double>(*v, en.key("anomaly_retention"));
  if (auto v = en.take("obs_variance")) c.obs_variance = parse_auto(*v, en.key("obs_variance"));
  en.finish();

  SectionReader tc("truncation", sections["truncation"]);
  auto policy = tc.take("policy");
  auto value = tc.take("value");
  if (policy || value) {
    if (!policy || !value) throw ValueError("truncation needs both policy and value");
    c.truncation = parse_truncation(*policy, *value);
  }
  tc.finish();

  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(fmt::format("cannot open config {}", path.string()));
  ExperimentConfig c = parse_experiment_config(in);
  // Relative truth files are resolved against the config's directory.
  if (!c.truth_file.empty() && c.truth_file.is_relative())
    c.truth_file = path.parent_path() / c.truth_file;
  return c;
}

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.output_dir.empty()) throw ValueError("output_dir is not set");
  const Prepared p = prepare(config);
  const Index j = p.truth.rows();

  RunEstimate est = config.mode == RunMode::hr ? run_hr(config, p) : run_lr(config, p);

  ExperimentOutcome outcome;
  MetricsReport& r = outcome.report;
  r.case_label = config.label;
  r.noise_eta = config.noise_eta_ub;
  r.c_r_ub = config.mode == RunMode::lr ? compression_rate(j, p.twin.background_reduced.sensors.size()) : 1.0;
  r.c_r_w = compression_rate(j, p.twin.w_sensors.size());
  r.wall_time_s = est.wall_time_s;
  r.peak_bytes = est.peak_bytes;
  if (est.factored) {
    r.rrmse = rrmse(p.truth.data(), est.factors);
    r.mae = mae(p.truth.data(), est.factors);
  } else {
    r.rrmse = rrmse(p.truth.data(), est.dense);
    r.mae = mae(p.truth.data(), est.dense);
  }
  if (p.sigma_t > 0.0) r.mae_pct = r.mae / p.sigma_t;

  if (config.mode == RunMode::lr && config.hr_reference) {
    const RunEstimate hr = run_hr(config, p);
    r.ram_compression = ram_compression(static_cast<double>(hr.peak_bytes),
                                        static_cast<double>(est.peak_bytes));
    if (config.timing && est.wall_time_s > 0.0 && hr.wall_time_s > 0.0)
      r.speedup = speedup(hr.wall_time_s, est.wall_time_s);
  }

  outcome.background_rrmse = rrmse(p.truth.data(), p.twin.background_full.data());
  outcome.state_size = est.state_size;
  outcome.observation_size = est.observation_size;
  outcome.modes = est.factored ? est.factors.rank() : 0;

  std::filesystem::create_directories(config.output_dir);
  write_text(config.output_dir / "report.csv", MetricsReport::csv_header() + "\n" + r.csv_row() + "\n");
  write_text(config.output_dir / "report.json", r.json() + "\n");
  write_text(config.output_dir / "tracking.csv", tracking_csv(p, est, config.tracking));
  if (config.write_estimate) {
    SnapshotWriter writer(config.output_dir / "estimate.snp", p.truth.meta());
    for (Index k = 0; k < p.truth.cols(); ++k) writer.write_column(est.column(k));
    writer.close();
  }
  return outcome;
}

std::vector<SweepRow> run_sweep(const std::vector<ExperimentConfig>& configs) {
  if (configs.empty()) throw ValueError("sweep needs at least one config");
  std::vector<SweepRow> rows;
  rows.reserve(configs.size());
  for (const ExperimentConfig& c : configs) {
    SweepRow row{c, std::nullopt, {}};
    try {
      row.report = run_experiment(c).report;
    } catch (const std::exception& e) {
      row.message = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::string out = MetricsReport::csv_header() + ",status,message\n";
  for (const SweepRow& row : rows) {
    if (row.report) {
      out += row.report->csv_row() + ",ok,\n";
    } else {
      out += fmt::format("{},{:.12g},{:.12g},{:.12g},,,,,,,error,{}\n", csv_field(row.config.label),
                         row.config.noise_eta_ub, row.config.ub_compression,
                         row.config.w_compression, csv_field(row.message));
    }
  }
  return out;
}

}  // namespace lrenkf
