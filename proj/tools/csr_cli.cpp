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

// Command-line front end: run, report, synth, inspect.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 internal failure (including any failed seed during `run`).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csr/csr.hpp"

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct RunFlags {
  std::string config;
  std::map<std::string, std::string> overrides;  // flag name -> config key value
  std::vector<std::string> sets;                 // raw key=value pairs
  bool json = false;
};

int do_run(const RunFlags& flags) {
  csr::ExperimentConfig config;
  if (!flags.config.empty()) csr::apply_config_file(config, flags.config);
  if (flags.overrides.count("data")) config.synth.reset();
  if (flags.overrides.count("synth")) config.csv_path.reset();
  for (const auto& [key, value] : flags.overrides) config.set(key, value);
  for (const auto& kv : flags.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw csr::ConfigError("--set expects key=value, got '" + kv + "'");
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  const auto manifest = csr::run_experiment(config);
  int failed = 0;
  for (const auto& s : manifest.seeds) {
    if (!s.ok) {
      ++failed;
      std::cerr << "seed " << s.seed << " failed: " << s.error << '\n';
    }
  }
  std::cout << "wrote " << manifest.path << " (" << manifest.seeds.size() - failed << '/'
            << manifest.seeds.size() << " seeds ok)\n";
  return failed == 0 ? kOk : kInternal;
}

int do_report(const std::vector<std::string>& manifests, const std::string& json_out) {
  const auto rep = csr::report(manifests);
  csr::print_report(std::cout, rep);
  if (!json_out.empty()) {
    std::ofstream out(json_out);
    if (!out) throw csr::Error("cannot write '" + json_out + "'");
    out << rep.to_json().dump(2) << '\n';
  }
  return kOk;
}

int do_synth(const std::string& profile, std::size_t n, std::uint64_t seed,
             const std::string& out_path) {
  const auto data = csr::generate_synthetic({n, csr::parse_noise_profile(profile), seed});
  if (out_path.empty() || out_path == "-") {
    csr::write_csv(std::cout, data);
  } else {
    std::ofstream out(out_path);
    if (!out) throw csr::Error("cannot write '" + out_path + "'");
    csr::write_csv(out, data);
  }
  return kOk;
}

int do_inspect(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw csr::DataError("cannot read '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw csr::DataError(std::string("malformed JSON: ") + e.what());
  }
  const auto calib = csr::calibration_from_json(j);
  std::printf("alpha        %g\n", calib.alpha);
  std::printf("n_cal        %zu\n", calib.n_cal);
  std::printf("rank         %zu (ceil((n_cal + 1)(1 - alpha)))\n",
              csr::conformal_rank(calib.n_cal, calib.alpha));
  if (calib.unbounded()) {
    std::printf("q_hat        unbounded (rank exceeds n_cal; every interval is infinite)\n");
  } else {
    std::printf("q_hat        %.17g\n", calib.q_hat);
  }
  if (!calib.scores.empty()) {
    auto sorted = calib.scores;
    std::sort(sorted.begin(), sorted.end());
    std::size_t inside = 0;
    for (double s : sorted) inside += s < 0.0;
    std::printf("scores       min %.6g  median %.6g  max %.6g\n", sorted.front(),
                sorted[sorted.size() / 2], sorted.back());
    std::printf("inside raw   %zu of %zu calibration rows (negative score)\n", inside,
                sorted.size());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformalized selective regression toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", csr::kVersion);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run the split/train/calibrate/sweep/evaluate pipeline");
  run->add_option("--config", run_flags.config, "Flat key = value config file");
  struct FlagSpec {
    const char* flag;
    const char* key;
    const char* help;
  };
  static const FlagSpec kRunFlags[] = {
      {"--data", "data", "CSV file with a header row"},
      {"--target", "target", "Target column name (default y)"},
      {"--synth", "synth",
       "Synthetic profile: homoscedastic | heteroscedastic-linear | heteroscedastic-step"},
      {"--synth-n", "synth_n", "Synthetic row count (default 5000)"},
      {"--synth-seed", "synth_seed", "Synthetic generator seed (default 0)"},
      {"--alpha", "alpha", "Miscoverage level (default 0.05)"},
      {"--model", "model", "Model family: linear | gbt (default gbt)"},
      {"--rejectors", "rejectors", "Comma list of csr, knn_variance"},
      {"--k", "k", "Neighbours for the kNN-variance rejector (default 10)"},
      {"--seeds", "seeds", "Seeds, e.g. 0,1,2 or 0-49"},
      {"--grid-step", "grid_step", "Coverage grid step (default 0.05)"},
      {"--fractions", "fractions", "Train,cal,test fractions (default 0.7,0.1,0.2)"},
      {"--prediction", "prediction", "point | midpoint"},
      {"--out", "out", "Output directory"},
  };
  for (const auto& f : kRunFlags) {
    run->add_option_function<std::string>(
        f.flag, [&run_flags, key = f.key](const std::string& v) { run_flags.overrides[key] = v; },
        f.help);
  }
  run->add_option("--set", run_flags.sets, "Hyperparameter override key=value (repeatable)");

  std::vector<std::string> manifests;
  std::string report_json;
  auto* rep = app.add_subcommand("report", "Aggregate one or more run manifests");
  rep->add_option("manifests", manifests, "manifest.json files")->required();
  rep->add_option("--json", report_json, "Also write the report as JSON");

  std::string profile = "heteroscedastic-linear", synth_out;
  std::size_t synth_n = 1000;
  std::uint64_t synth_seed = 0;
  auto* syn = app.add_subcommand("synth", "Emit a synthetic dataset as CSV");
  syn->add_option("--profile", profile, "Noise profile");
  syn->add_option("--n", synth_n, "Row count");
  syn->add_option("--seed", synth_seed, "Generator seed");
  syn->add_option("--out", synth_out, "Output file (default stdout)");

  std::string calib_path;
  auto* insp = app.add_subcommand("inspect", "Pretty-print a calibration JSON");
  insp->add_option("calibration", calib_path, "calibration.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return do_run(run_flags);
    if (*rep) return do_report(manifests, report_json);
    if (*syn) return do_synth(profile, synth_n, synth_seed, synth_out);
    if (*insp) return do_inspect(calib_path);
  } catch (const csr::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const csr::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}
