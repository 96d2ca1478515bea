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

#include <array>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "csr/error.hpp"
#include "csr/random.hpp"

namespace csr {

/// Tabular regression data: a row-major feature matrix and one target per row.
struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> features;  // rows * cols, row-major
  std::vector<double> targets;
  std::vector<std::string> feature_names;
  // Rows discarded during ingestion because of missing or non-finite cells.
  std::size_t dropped_rows = 0;

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * cols, cols};
  }

  bool empty() const { return rows == 0; }
};

// Checks the structural invariants shared by every Dataset value.
inline void validate_shape(const Dataset& data) {
  if (data.features.size() != data.rows * data.cols) {
    throw DataError("feature matrix size does not match rows * cols");
  }
  if (data.targets.size() != data.rows) {
    throw DataError("target count does not match row count");
  }
  if (!data.feature_names.empty() && data.feature_names.size() != data.cols) {
    throw DataError("feature name count does not match column count");
  }
}

inline constexpr std::size_t kMinDatasetRows = 10;

// Additional checks applied to a freshly ingested or generated dataset.
inline void validate_source(const Dataset& data,
                            std::size_t min_rows = kMinDatasetRows) {
  validate_shape(data);
  if (data.cols == 0) throw DataError("dataset has zero feature columns");
  if (data.rows < min_rows) {
    throw DataError("dataset has " + std::to_string(data.rows) +
                    " valid rows; at least " + std::to_string(min_rows) +
                    " required");
  }
}

/// Returns the rows of `data` listed in `indices`, in that order.
inline Dataset select_rows(const Dataset& data,
                           std::span<const std::size_t> indices) {
  Dataset out;
  out.rows = indices.size();
  out.cols = data.cols;
  out.feature_names = data.feature_names;
  out.features.reserve(out.rows * out.cols);
  out.targets.reserve(out.rows);
  for (const auto i : indices) {
    const auto r = data.row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.targets.push_back(data.targets[i]);
  }
  return out;
}

/// Row-wise concatenation of two datasets with the same column count.
inline Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.cols != b.cols) throw DimensionError(a.cols, b.cols);
  Dataset out = a;
  out.rows += b.rows;
  out.features.insert(out.features.end(), b.features.begin(),
                      b.features.end());
  out.targets.insert(out.targets.end(), b.targets.begin(), b.targets.end());
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

// Parses a finite double occupying the whole field.
inline std::optional<double> parse_finite(std::string_view field) {
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

}  // namespace detail

/// Parses CSV text with a header row. The target column moves to `targets`;
/// all other columns become features. Rows with a missing, unparseable or
/// non-finite cell (or the wrong field count) are dropped and counted.
/// Fewer than `min_rows` surviving rows is an error.
inline Dataset parse_csv(std::istream& in, std::string_view target_column,
                         std::size_t min_rows = kMinDatasetRows) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV input has no header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  const auto header = detail::split_fields(line);
  std::optional<std::size_t> target_idx;
  Dataset data;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == target_column && !target_idx) {
      target_idx = i;
    } else {
      data.feature_names.emplace_back(header[i]);
    }
  }
  if (!target_idx) {
    throw DataError("missing target column '" + std::string(target_column) +
                    "'");
  }
  data.cols = data.feature_names.size();
  if (data.cols == 0) throw DataError("dataset has zero feature columns");

  std::vector<double> row(header.size());
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_fields(line);
    bool ok = fields.size() == header.size();
    for (std::size_t i = 0; ok && i < fields.size(); ++i) {
      const auto v = detail::parse_finite(fields[i]);
      if (!v) ok = false;
      else row[i] = *v;
    }
    if (!ok) {
      ++data.dropped_rows;
      continue;
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i == *target_idx) data.targets.push_back(row[i]);
      else data.features.push_back(row[i]);
    }
    ++data.rows;
  }
  validate_source(data, min_rows);
  return data;
}

inline Dataset load_csv(const std::string& path,
                        std::string_view target_column,
                        std::size_t min_rows = kMinDatasetRows) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file '" + path + "'");
  return parse_csv(in, target_column, min_rows);
}

/// Writes `data` as CSV with the feature columns first and the target last.
inline void write_csv(std::ostream& out, const Dataset& data,
                      std::string_view target_name = "y") {
  char buf[32];
  for (std::size_t j = 0; j < data.cols; ++j) {
    out << (data.feature_names.empty() ? "x" + std::to_string(j)
                                       : data.feature_names[j])
        << ',';
  }
  out << target_name << '\n';
  for (std::size_t i = 0; i < data.rows; ++i) {
    for (const double v : data.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << buf << ',';
    }
    std::snprintf(buf, sizeof buf, "%.17g", data.targets[i]);
    out << buf << '\n';
  }
}

// ---------------------------------------------------------------------------
// Splitting

/// Per-feature affine map z = (x - mean) / scale, fitted on training rows.
struct FeatureScaling {
  std::vector<double> means;
  std::vector<double> scales;

  static FeatureScaling fit(const Dataset& data) {
    FeatureScaling s;
    s.means.assign(data.cols, 0.0);
    s.scales.assign(data.cols, 1.0);
    if (data.rows == 0) return s;
    for (std::size_t i = 0; i < data.rows; ++i) {
      const auto r = data.row(i);
      for (std::size_t j = 0; j < data.cols; ++j) s.means[j] += r[j];
    }
    for (auto& m : s.means) m /= static_cast<double>(data.rows);
    std::vector<double> ss(data.cols, 0.0);
    for (std::size_t i = 0; i < data.rows; ++i) {
      const auto r = data.row(i);
      for (std::size_t j = 0; j < data.cols; ++j) {
        const double d = r[j] - s.means[j];
        ss[j] += d * d;
      }
    }
    for (std::size_t j = 0; j < data.cols; ++j) {
      const double sd = std::sqrt(ss[j] / static_cast<double>(data.rows));
      // Constant columns are centered but not rescaled.
      s.scales[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  Dataset apply(Dataset data) const {
    if (means.size() != data.cols) throw DimensionError(means.size(), data.cols);
    for (std::size_t i = 0; i < data.rows; ++i) {
      for (std::size_t j = 0; j < data.cols; ++j) {
        auto& v = data.features[i * data.cols + j];
        v = (v - means[j]) / scales[j];
      }
    }
    return data;
  }
};

using SplitFractions = std::array<double, 3>;

inline constexpr SplitFractions kDefaultFractions{0.7, 0.1, 0.2};

struct DataSplit {
  Dataset train;
  Dataset cal;
  Dataset test;
  std::uint64_t seed = 0;
  SplitFractions fractions = kDefaultFractions;
  // Source row index of every row, per part, in part order.
  std::vector<std::size_t> train_rows, cal_rows, test_rows;
  // Present when features were standardized with training statistics.
  std::optional<FeatureScaling> scaling;
};

struct SplitSizes {
  std::size_t train, cal, test;
};

// train and cal take floor(fraction * n); test takes the remainder. The small
// epsilon absorbs representation error such as 0.7 * 100 = 70.00000000000001
// or 0.29 * 100 = 28.999999999999996.
inline SplitSizes split_sizes(std::size_t n, const SplitFractions& f) {
  for (const double v : f) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError("split fractions must be positive");
    }
  }
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  const auto nd = static_cast<double>(n);
  const auto train = static_cast<std::size_t>(std::floor(f[0] * nd + 1e-9));
  const auto cal = static_cast<std::size_t>(std::floor(f[1] * nd + 1e-9));
  if (train == 0 || cal == 0 || train + cal >= n) {
    throw DataError("dataset of " + std::to_string(n) +
                    " rows is too small to populate every split part");
  }
  return {train, cal, n - train - cal};
}

/// Seeded uniform shuffle followed by a cumulative partition.
inline DataSplit split(const Dataset& data,
                       const SplitFractions& fractions = kDefaultFractions,
                       std::uint64_t seed = 0, bool standardize = true) {
  validate_shape(data);
  const auto sizes = split_sizes(data.rows, fractions);
  std::vector<std::size_t> perm(data.rows);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(perm.begin(), perm.end());

  DataSplit out;
  out.seed = seed;
  out.fractions = fractions;
  out.train_rows.assign(perm.begin(), perm.begin() + sizes.train);
  out.cal_rows.assign(perm.begin() + sizes.train,
                      perm.begin() + sizes.train + sizes.cal);
  out.test_rows.assign(perm.begin() + sizes.train + sizes.cal, perm.end());
  out.train = select_rows(data, out.train_rows);
  out.cal = select_rows(data, out.cal_rows);
  out.test = select_rows(data, out.test_rows);
  if (standardize) {
    out.scaling = FeatureScaling::fit(out.train);
    out.train = out.scaling->apply(std::move(out.train));
    out.cal = out.scaling->apply(std::move(out.cal));
    out.test = out.scaling->apply(std::move(out.test));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

enum class NoiseProfile { kHomoscedastic, kHeteroscedasticLinear, kHeteroscedasticStep };

inline std::string_view to_string(NoiseProfile p) {
  switch (p) {
    case NoiseProfile::kHomoscedastic: return "homoscedastic";
    case NoiseProfile::kHeteroscedasticLinear: return "heteroscedastic-linear";
    case NoiseProfile::kHeteroscedasticStep: return "heteroscedastic-step";
  }
  return "unknown";
}

inline NoiseProfile parse_noise_profile(std::string_view name) {
  for (auto p : {NoiseProfile::kHomoscedastic,
                 NoiseProfile::kHeteroscedasticLinear,
                 NoiseProfile::kHeteroscedasticStep}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown noise profile '" + std::string(name) + "'");
}

struct SynthSpec {
  std::size_t n = 1000;
  NoiseProfile noise = NoiseProfile::kHomoscedastic;
  std::uint64_t seed = 0;
};

// Generator mean and noise scale; x lives on [0, 5].
inline double synth_mean(double x) { return x * std::sin(x); }

inline double synth_sigma(NoiseProfile p, double x) {
  switch (p) {
    case NoiseProfile::kHomoscedastic: return 0.3;
    case NoiseProfile::kHeteroscedasticLinear: return 0.1 + 0.3 * x;
    case NoiseProfile::kHeteroscedasticStep: return x < 2.5 ? 0.1 : 1.0;
  }
  return 0.0;
}

/// y = x sin(x) + sigma(x) * eps with x ~ U[0, 5] and eps ~ N(0, 1).
inline Dataset generate_synthetic(const SynthSpec& spec) {
  if (spec.n < kMinDatasetRows) {
    throw ConfigError("synthetic dataset needs n >= " +
                      std::to_string(kMinDatasetRows));
  }
  Rng rng(spec.seed);
  Dataset data;
  data.rows = spec.n;
  data.cols = 1;
  data.feature_names = {"x"};
  data.features.reserve(spec.n);
  data.targets.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double x = rng.uniform(0.0, 5.0);
    const double eps = rng.normal();
    data.features.push_back(x);
    data.targets.push_back(synth_mean(x) + synth_sigma(spec.noise, x) * eps);
  }
  return data;
}

}  // namespace csr
