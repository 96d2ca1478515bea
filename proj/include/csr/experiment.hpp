/*
 * Copyright 2026 The CSR Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <chrono>
#include <limits>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "csr/conformal.hpp"
#include "csr/dataset.hpp"
#include "csr/error.hpp"
#include "csr/evaluation.hpp"
#include "csr/hyperparams.hpp"
#include "csr/knn.hpp"
#include "csr/quantile_models.hpp"
#include "csr/selective.hpp"
#include "csr/version.hpp"

namespace csr {

struct ExperimentConfig {
  // Exactly one data source: a CSV file or a synthetic generator.
  std::optional<std::string> csv_path;
  std::string target = "y";
  std::optional<SynthSpec> synth;

  SplitFractions fractions = kDefaultFractions;
  bool standardize = true;
  double alpha = 0.05;
  ModelFamily family = ModelFamily::kGbt;
  Hyperparams hyperparams;
  std::vector<std::string> rejectors{"csr", "knn_variance"};
  std::size_t k = 10;
  double grid_step = 0.05;
  std::vector<std::uint64_t> seeds{0};
  PredictionSource prediction = PredictionSource::kPointModel;
  std::string out_dir = "csr_out";

  void set(std::string_view key, std::string_view value);
  void validate() const;
  nlohmann::json to_json() const;
  std::string dataset_id() const;
};

namespace detail {

inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  for (const auto f : split_fields(text)) {
    if (!f.empty()) out.emplace_back(f);
  }
  return out;
}

// "0,3,7" or "0-49" or a mix of both.
inline std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(text)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      seeds.push_back(parse_number<std::uint64_t>("seeds", item));
      continue;
    }
    const auto lo = parse_number<std::uint64_t>("seeds", std::string_view(item).substr(0, dash));
    const auto hi = parse_number<std::uint64_t>("seeds", std::string_view(item).substr(dash + 1));
    if (hi < lo) throw ConfigError("empty seed range '" + item + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean '" + std::string(v) + "' for '" + std::string(key) + "'");
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void ExperimentConfig::set(std::string_view key, std::string_view value) {
  using detail::parse_number;
  if (key == "data") {
    csv_path = std::string(value);
  } else if (key == "target") {
    target = std::string(value);
  } else if (key == "synth") {
    if (!synth) synth = SynthSpec{5000, NoiseProfile::kHomoscedastic, 0};
    synth->noise = parse_noise_profile(value);
  } else if (key == "synth_n") {
    if (!synth) synth = SynthSpec{5000, NoiseProfile::kHomoscedastic, 0};
    synth->n = parse_number<std::size_t>(key, value);
  } else if (key == "synth_seed") {
    if (!synth) synth = SynthSpec{5000, NoiseProfile::kHomoscedastic, 0};
    synth->seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "fractions") {
    const auto parts = detail::split_list(value);
    if (parts.size() != 3) throw ConfigError("fractions needs three comma-separated values");
    for (std::size_t i = 0; i < 3; ++i) fractions[i] = parse_number<double>(key, parts[i]);
  } else if (key == "standardize") {
    standardize = detail::parse_bool(key, value);
  } else if (key == "alpha") {
    alpha = parse_number<double>(key, value);
  } else if (key == "model") {
    family = parse_model_family(value);
  } else if (key == "rejectors") {
    rejectors = detail::split_list(value);
  } else if (key == "k") {
    k = parse_number<std::size_t>(key, value);
  } else if (key == "grid_step") {
    grid_step = parse_number<double>(key, value);
  } else if (key == "seeds") {
    seeds = detail::parse_seeds(value);
  } else if (key == "prediction") {
    if (value == "point") prediction = PredictionSource::kPointModel;
    else if (value == "midpoint") prediction = PredictionSource::kIntervalMidpoint;
    else throw ConfigError("prediction must be 'point' or 'midpoint'");
  } else if (key == "out") {
    out_dir = std::string(value);
  } else if (key == "seed") {
    throw ConfigError("use 'seeds' to choose experiment seeds");
  } else {
    hyperparams.set(key, value);
  }
}

inline void ExperimentConfig::validate() const {
  if (csv_path.has_value() == synth.has_value()) {
    throw ConfigError("exactly one data source (data or synth) is required");
  }
  check_alpha(alpha);
  split_sizes(1000, fractions);  // fraction checks only
  if (rejectors.empty()) throw ConfigError("at least one rejector is required");
  for (const auto& r : rejectors) {
    if (r != "csr" && r != "knn_variance") throw ConfigError("unknown rejector '" + r + "'");
  }
  if (k == 0) throw ConfigError("k must be positive");
  coverage_grid(grid_step);
  if (seeds.empty()) throw ConfigError("seed list is empty");
  if (out_dir.empty()) throw ConfigError("output directory is empty");
}

inline std::string ExperimentConfig::dataset_id() const {
  if (csv_path) return std::filesystem::path(*csv_path).stem().string();
  return "synth-" + std::string(to_string(synth->noise));
}

inline nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  if (csv_path) {
    j["data"] = *csv_path;
    j["target"] = target;
  } else {
    j["synth"] = to_string(synth->noise);
    j["synth_n"] = synth->n;
    j["synth_seed"] = synth->seed;
  }
  j["fractions"] = fractions;
  j["standardize"] = standardize;
  j["alpha"] = alpha;
  j["model"] = to_string(family);
  j["hyperparams"] = hyperparams.to_map();
  j["hyperparams"].erase("seed");
  j["rejectors"] = rejectors;
  j["k"] = k;
  j["grid_step"] = grid_step;
  j["seeds"] = seeds;
  j["prediction"] = prediction == PredictionSource::kPointModel ? "point" : "midpoint";
  j["out"] = out_dir;
  return j;
}

/// Reads "key = value" lines; blank lines and '#' comments are ignored.
inline void apply_config_text(ExperimentConfig& config, std::istream& in) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    auto key = detail::trim(body.substr(0, eq));
    auto value = detail::trim(body.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    config.set(key, value);
  }
}

inline void apply_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  apply_config_text(config, in);
}

// ---------------------------------------------------------------------------
// Running

// File paths are relative to the directory holding manifest.json.
struct SeedRecord {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::map<std::string, std::string> curves;  // rejector -> path
  std::map<std::string, std::string> sweeps;
  std::string summary;
  std::string calibration;
  std::string point_model;
  std::string quantile_model;
};

struct RunManifest {
  nlohmann::json config;
  std::string dataset;
  std::string started_at;
  std::string finished_at;
  std::string version = kVersion;
  std::vector<SeedRecord> seeds;
  std::string path;  // where the manifest itself was written

  bool all_ok() const {
    return std::all_of(seeds.begin(), seeds.end(), [](const auto& s) { return s.ok; });
  }
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

inline constexpr const char* kManifestSchema = "csr.manifest/1";

inline nlohmann::json RunManifest::to_json() const {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& s : seeds) {
    nlohmann::json r{{"seed", s.seed}, {"status", s.ok ? "ok" : "failed"}};
    if (s.ok) {
      r["files"] = {{"curves", s.curves},           {"sweeps", s.sweeps},
                    {"summary", s.summary},         {"calibration", s.calibration},
                    {"point_model", s.point_model}, {"quantile_model", s.quantile_model}};
    } else {
      r["error"] = s.error;
    }
    runs.push_back(std::move(r));
  }
  return {{"schema", kManifestSchema}, {"version", version},   {"dataset", dataset},
          {"started_at", started_at},  {"finished_at", finished_at}, {"config", config},
          {"runs", std::move(runs)}};
}

inline RunManifest RunManifest::from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != kManifestSchema) throw DataError("unsupported manifest schema");
  RunManifest m;
  m.config = j.at("config");
  m.dataset = j.at("dataset").get<std::string>();
  m.started_at = j.value("started_at", "");
  m.finished_at = j.value("finished_at", "");
  m.version = j.value("version", "");
  for (const auto& r : j.at("runs")) {
    SeedRecord s;
    s.seed = r.at("seed").get<std::uint64_t>();
    s.ok = r.at("status").get<std::string>() == "ok";
    if (s.ok) {
      const auto& f = r.at("files");
      s.curves = f.at("curves").get<std::map<std::string, std::string>>();
      s.sweeps = f.at("sweeps").get<std::map<std::string, std::string>>();
      s.summary = f.at("summary").get<std::string>();
      s.calibration = f.at("calibration").get<std::string>();
      s.point_model = f.at("point_model").get<std::string>();
      s.quantile_model = f.at("quantile_model").get<std::string>();
    } else {
      s.error = r.value("error", "");
    }
    m.seeds.push_back(std::move(s));
  }
  return m;
}

namespace detail {

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Writes through a temporary sibling and renames it into place.
inline void write_atomic(const std::filesystem::path& path,
                         const std::function<void(std::ostream&)>& body) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    body(out);
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_atomic(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

}  // namespace detail

inline Dataset load_source(const ExperimentConfig& config) {
  if (config.csv_path) return load_csv(*config.csv_path, config.target);
  return generate_synthetic(*config.synth);
}

/// Everything one seed produces in memory, before anything is written.
struct SeedResult {
  PointModel point;
  QuantilePairModel pair;
  ConformalCalibration calibration;
  std::vector<ThresholdSweep> sweeps;
  std::vector<CoverageErrorCurve> curves;  // normalized together
  std::vector<EvalSummary> summaries;
  std::vector<RestrictedRow> restricted;
  std::vector<double> test_targets;
  std::vector<std::vector<double>> predictions;  // per rejector, per test row
};

/// Split, train, calibrate, sweep and evaluate for one seed.
inline SeedResult run_seed(const ExperimentConfig& config, const Dataset& data,
                           std::uint64_t seed) {
  const auto parts = split(data, config.fractions, seed, config.standardize);
  Hyperparams hp = config.hyperparams;
  hp.seed = seed;

  SeedResult res;
  res.point = train_point_model(parts.train, config.family, hp);
  res.pair = train_quantile_pair(parts.train, config.alpha, config.family, hp);
  res.calibration = calibrate(res.pair, parts.cal, config.alpha);
  res.test_targets = parts.test.targets;

  std::vector<double> shared(parts.test.rows);
  for (std::size_t i = 0; i < parts.test.rows; ++i) shared[i] = res.point.predict(parts.test.row(i));

  const auto grid = coverage_grid(config.grid_step);
  const auto dataset = config.dataset_id();
  for (const auto& name : config.rejectors) {
    std::vector<double> preds = shared;
    std::optional<Rejector> rejector;
    if (name == "csr") {
      rejector = CsrRejector{res.pair, res.calibration};
      if (config.prediction == PredictionSource::kIntervalMidpoint) {
        for (std::size_t i = 0; i < parts.test.rows; ++i) {
          const auto iv = conformal_interval(res.pair, res.calibration, parts.test.row(i));
          if (!iv.unbounded()) preds[i] = iv.lower + (iv.upper - iv.lower) / 2.0;
        }
      }
    } else {
      rejector = KnnVarianceRejector{KnnEstimator(concat(parts.train, parts.cal), config.k)};
    }
    auto sweep = sweep_thresholds(*rejector, parts.test, grid);
    res.curves.push_back(build_curve(sweep, res.test_targets, preds, dataset));
    res.sweeps.push_back(std::move(sweep));
    res.predictions.push_back(std::move(preds));
  }
  res.curves = normalize(std::move(res.curves));
  for (const auto& c : res.curves) res.summaries.push_back(summarize(c));
  res.restricted = restricted_comparison(res.summaries);
  return res;
}

/// Runs every configured seed and writes per-seed outputs plus manifest.json
/// under config.out_dir. Data loading errors propagate; a failing seed is
/// recorded in the manifest and the remaining seeds still run.
inline RunManifest run_experiment(const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  config.validate();
  RunManifest manifest;
  manifest.started_at = detail::utc_now();
  manifest.config = config.to_json();
  manifest.dataset = config.dataset_id();
  const Dataset data = load_source(config);

  const fs::path out(config.out_dir);
  fs::create_directories(out);
  for (const auto seed : config.seeds) {
    SeedRecord rec;
    rec.seed = seed;
    try {
      const auto res = run_seed(config, data, seed);
      const fs::path rel = "seed_" + std::to_string(seed);
      fs::create_directories(out / rel);
      for (std::size_t r = 0; r < res.curves.size(); ++r) {
        const auto& name = res.curves[r].method;
        const auto curve_path = rel / ("curve_" + name + ".csv");
        const auto sweep_path = rel / ("sweep_" + name + ".csv");
        detail::write_atomic(out / curve_path,
                             [&](std::ostream& o) { write_curve_csv(o, res.curves[r]); });
        detail::write_atomic(out / sweep_path,
                             [&](std::ostream& o) { write_sweep_csv(o, res.sweeps[r]); });
        rec.curves[name] = curve_path.generic_string();
        rec.sweeps[name] = sweep_path.generic_string();
      }
      const double normalizer = res.curves.empty() ? 0.0 : res.curves.front().normalizer;
      rec.summary = (rel / "summary.json").generic_string();
      detail::write_json(out / rec.summary, summary_to_json(manifest.dataset, seed, normalizer,
                                                            res.summaries, res.restricted));
      rec.calibration = (rel / "calibration.json").generic_string();
      detail::write_json(out / rec.calibration, to_json(res.calibration));
      rec.point_model = (rel / "point_model.json").generic_string();
      detail::write_json(out / rec.point_model, to_json(res.point));
      rec.quantile_model = (rel / "quantile_model.json").generic_string();
      detail::write_json(out / rec.quantile_model, to_json(res.pair));
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
    manifest.seeds.push_back(std::move(rec));
  }
  manifest.finished_at = detail::utc_now();
  manifest.path = (out / "manifest.json").string();
  detail::write_json(manifest.path, manifest.to_json());
  return manifest;
}

// ---------------------------------------------------------------------------
// Reporting

struct MethodStats {
  std::string method;
  std::size_t runs = 0;
  double auc_mean = 0.0, auc_sd = 0.0;
  double distance_mean = 0.0, distance_sd = 0.0;
  std::vector<double> auc;  // per seed
  std::vector<double> distance;
};

struct DatasetReport {
  std::string dataset;
  std::vector<MethodStats> methods;  // first-seen order
  std::string auc_winner;            // lowest mean AUC
  // level -> method -> number of seeds in which the method won that level
  std::map<std::string, std::map<std::string, int>> restricted_wins;
};

struct ComparisonReport {
  std::vector<DatasetReport> datasets;
  nlohmann::json to_json() const;
};

namespace detail {

inline void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  mean = sd = 0.0;
  if (v.empty()) return;
  for (auto x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  for (auto x : v) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in '" + path + "': " + e.what());
  }
}

}  // namespace detail

/// Aggregates per-seed summaries from one or more manifests by dataset.
inline ComparisonReport report(const std::vector<std::string>& manifest_paths) {
  if (manifest_paths.empty()) throw ConfigError("report needs at least one manifest");
  ComparisonReport rep;
  auto find_dataset = [&](const std::string& id) -> DatasetReport& {
    for (auto& d : rep.datasets) {
      if (d.dataset == id) return d;
    }
    rep.datasets.push_back({id, {}, {}, {}});
    return rep.datasets.back();
  };
  for (const auto& path : manifest_paths) {
    RunManifest m;
    try {
      m = RunManifest::from_json(detail::read_json(path));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("malformed manifest '" + path + "': " + e.what());
    }
    auto& ds = find_dataset(m.dataset);
    for (const auto& run : m.seeds) {
      if (!run.ok) continue;
      const auto summary_path =
          (std::filesystem::path(path).parent_path() / run.summary).string();
      auto summary = detail::read_json(summary_path);
      if (summary.value("schema", "") != kSummarySchema) {
        throw DataError("unsupported summary schema in '" + summary_path + "'");
      }
      for (const auto& [method, s] : summary.at("methods").items()) {
        auto it = std::find_if(ds.methods.begin(), ds.methods.end(),
                               [&](const auto& x) { return x.method == method; });
        if (it == ds.methods.end()) {
          MethodStats fresh;
          fresh.method = method;
          ds.methods.push_back(std::move(fresh));
          it = ds.methods.end() - 1;
        }
        it->auc.push_back(s.at("auc").get<double>());
        it->distance.push_back(s.at("distance").get<double>());
      }
      for (const auto& row : summary.at("restricted")) {
        ds.restricted_wins[level_key(row.at("level").get<double>())]
                          [row.at("winner").get<std::string>()] += 1;
      }
    }
  }
  for (auto& ds : rep.datasets) {
    double best = std::numeric_limits<double>::infinity();
    for (auto& ms : ds.methods) {
      ms.runs = ms.auc.size();
      detail::mean_sd(ms.auc, ms.auc_mean, ms.auc_sd);
      detail::mean_sd(ms.distance, ms.distance_mean, ms.distance_sd);
      if (ms.auc_mean < best) {
        best = ms.auc_mean;
        ds.auc_winner = ms.method;
      }
    }
  }
  return rep;
}

inline nlohmann::json ComparisonReport::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& ds : datasets) {
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& m : ds.methods) {
      methods.push_back({{"method", m.method},
                         {"runs", m.runs},
                         {"auc_mean", m.auc_mean},
                         {"auc_sd", m.auc_sd},
                         {"distance_mean", m.distance_mean},
                         {"distance_sd", m.distance_sd},
                         {"auc", m.auc},
                         {"distance", m.distance}});
    }
    out.push_back({{"dataset", ds.dataset},
                   {"methods", std::move(methods)},
                   {"auc_winner", ds.auc_winner},
                   {"restricted_wins", ds.restricted_wins}});
  }
  return {{"schema", "csr.report/1"}, {"datasets", std::move(out)}};
}

inline void print_report(std::ostream& out, const ComparisonReport& rep) {
  char buf[256];
  for (const auto& ds : rep.datasets) {
    out << "dataset: " << ds.dataset << '\n';
    std::snprintf(buf, sizeof buf, "  %-14s %5s %18s %18s\n", "method", "runs", "AUC (mean +- sd)",
                  "distance (mean +- sd)");
    out << buf;
    for (const auto& m : ds.methods) {
      std::snprintf(buf, sizeof buf, "  %-14s %5zu %9.4f +- %6.4f %9.4f +- %6.4f%s\n",
                    m.method.c_str(), m.runs, m.auc_mean, m.auc_sd, m.distance_mean,
                    m.distance_sd, m.method == ds.auc_winner ? "  <- lowest AUC" : "");
      out << buf;
    }
    out << "  restricted-coverage wins (seeds):\n";
    for (const auto& [level, wins] : ds.restricted_wins) {
      out << "    coverage " << level << ':';
      for (const auto& [method, count] : wins) out << ' ' << method << '=' << count;
      out << '\n';
    }
  }
}

}  // namespace csr
