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
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "csr/conformal.hpp"
#include "csr/dataset.hpp"
#include "csr/error.hpp"
#include "csr/knn.hpp"
#include "csr/quantile_models.hpp"

namespace csr {

/// Uncertainty is the conformalized interval width W(x).
struct CsrRejector {
  QuantilePairModel model;
  ConformalCalibration calibration;
};

/// Uncertainty is the kNN estimate of Var(Y | X = x).
struct KnnVarianceRejector {
  KnnEstimator estimator;
};

using Rejector = std::variant<CsrRejector, KnnVarianceRejector>;

inline std::string rejector_name(const Rejector& r) {
  return std::holds_alternative<CsrRejector>(r) ? "csr" : "knn_variance";
}

inline double uncertainty(const Rejector& rejector, std::span<const double> x) {
  if (const auto* c = std::get_if<CsrRejector>(&rejector)) {
    return conformal_interval(c->model, c->calibration, x).width;
  }
  return std::get<KnnVarianceRejector>(rejector).estimator.mean_variance(x).variance;
}

struct Prediction {
  double value = 0.0;
  std::optional<PredictionInterval> interval;  // set for csr
};

struct SelectiveOutput {
  std::optional<Prediction> prediction;  // empty means rejected
  double uncertainty = 0.0;

  bool rejected() const { return !prediction.has_value(); }
};

enum class PredictionSource { kPointModel, kIntervalMidpoint };

/// Predicts when uncertainty(x) < lambda and rejects otherwise, equality
/// included. kIntervalMidpoint replaces the point prediction by the centre of
/// the conformal interval for csr rejectors.
inline SelectiveOutput decide(const Rejector& rejector, const PointModel& point,
                              std::span<const double> x, double lambda,
                              PredictionSource source = PredictionSource::kPointModel) {
  if (!std::isfinite(lambda)) throw ConfigError("rejection threshold must be finite");
  if (x.size() != point.dim()) throw DimensionError(point.dim(), x.size());
  SelectiveOutput out;
  std::optional<PredictionInterval> interval;
  if (const auto* c = std::get_if<CsrRejector>(&rejector)) {
    interval = conformal_interval(c->model, c->calibration, x);
    out.uncertainty = interval->width;
  } else {
    out.uncertainty = uncertainty(rejector, x);
  }
  if (!(out.uncertainty < lambda)) return out;
  Prediction p;
  p.interval = interval;
  p.value = source == PredictionSource::kIntervalMidpoint && interval
                ? interval->lower + (interval->upper - interval->lower) / 2.0
                : point.predict(x);
  out.prediction = p;
  return out;
}

// ---------------------------------------------------------------------------
// Threshold sweeps

struct SweepLevel {
  double target_coverage = 0.0;
  std::size_t accepted = 0;
  double realized_coverage = 0.0;
  double lambda = 0.0;
};

/// Uncertainty scores over a test set, ranked once, and the threshold that
/// realizes each requested coverage.
struct ThresholdSweep {
  std::string rejector;
  std::vector<double> scores;       // per test row
  std::vector<std::size_t> ranked;  // row indices by (score, row index)
  std::vector<SweepLevel> levels;

  std::size_t size() const { return scores.size(); }
};

/// ceil(c * n), tolerant of products like 0.7 * 10 = 7.000000000000001.
inline std::size_t accepted_count(double coverage, std::size_t n) {
  const double x = coverage * static_cast<double>(n);
  const auto m = static_cast<std::size_t>(std::ceil(x - 1e-9));
  return std::min(m, n);
}

inline std::vector<double> coverage_grid(double step = 0.05) {
  if (!(step > 0.0 && step <= 1.0)) throw ConfigError("grid step must lie in (0, 1]");
  std::vector<double> grid;
  const auto count = static_cast<std::size_t>(std::floor(1.0 / step + 1e-9));
  for (std::size_t i = 1; i <= count; ++i) grid.push_back(static_cast<double>(i) * step);
  if (grid.empty() || std::abs(grid.back() - 1.0) > 1e-9) grid.push_back(1.0);
  grid.back() = 1.0;
  return grid;
}

namespace detail {

inline void check_grid(std::span<const double> grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) {
      throw ConfigError("coverage grid values must lie in [0, 1]");
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) {
      throw ConfigError("coverage grid must be strictly ascending");
    }
  }
}

// Offset used when no larger distinct finite score exists.
inline double overshoot(double lo, double hi) {
  return 0.5 * std::max(hi - lo, 1.0);
}

}  // namespace detail

/// Rank selection: for target c the ceil(c * n) lowest-uncertainty rows are
/// accepted (ties by row index). lambda is the midpoint between the last
/// accepted score and the next larger distinct score, so decide() at lambda
/// reproduces the accepted set whenever the boundary score is untied.
inline ThresholdSweep sweep_from_scores(std::string name, std::vector<double> scores,
                                        std::span<const double> grid) {
  if (scores.empty()) throw DataError("test set is empty");
  detail::check_grid(grid);
  ThresholdSweep sw;
  sw.rejector = std::move(name);
  sw.scores = std::move(scores);
  const auto n = sw.scores.size();
  sw.ranked.resize(n);
  std::iota(sw.ranked.begin(), sw.ranked.end(), std::size_t{0});
  std::stable_sort(sw.ranked.begin(), sw.ranked.end(), [&](std::size_t a, std::size_t b) {
    return sw.scores[a] < sw.scores[b];
  });
  auto at = [&](std::size_t rank) { return sw.scores[sw.ranked[rank]]; };
  const double lo = at(0);
  double max_finite = lo;
  for (std::size_t r = 0; r < n && std::isfinite(at(r)); ++r) max_finite = at(r);

  for (const double c : grid) {
    SweepLevel lv;
    lv.target_coverage = c;
    lv.accepted = accepted_count(c, n);
    lv.realized_coverage = static_cast<double>(lv.accepted) / static_cast<double>(n);
    if (lv.accepted == 0) {
      lv.lambda = lo;
    } else {
      const double last = at(lv.accepted - 1);
      std::size_t j = lv.accepted;
      while (j < n && !(at(j) > last)) ++j;
      if (!std::isfinite(last)) {
        lv.lambda = kInfinity;
      } else if (j < n && std::isfinite(at(j))) {
        lv.lambda = last + (at(j) - last) / 2.0;
      } else {
        lv.lambda = last + detail::overshoot(lo, max_finite);
      }
    }
    sw.levels.push_back(lv);
  }
  return sw;
}

inline std::vector<double> uncertainty_scores(const Rejector& rejector, const Dataset& test) {
  std::vector<double> scores(test.rows);
  for (std::size_t i = 0; i < test.rows; ++i) scores[i] = uncertainty(rejector, test.row(i));
  return scores;
}

inline ThresholdSweep sweep_thresholds(const Rejector& rejector, const Dataset& test,
                                       std::span<const double> grid) {
  if (test.empty()) throw DataError("test set is empty");
  return sweep_from_scores(rejector_name(rejector), uncertainty_scores(rejector, test), grid);
}

inline const SweepLevel& find_level(const ThresholdSweep& sweep, double coverage) {
  for (const auto& lv : sweep.levels) {
    if (std::abs(lv.target_coverage - coverage) <= 1e-12) return lv;
  }
  throw ConfigError("coverage " + std::to_string(coverage) + " is not in the sweep grid");
}

/// Accepted test-row indices at a grid coverage, ascending.
inline std::vector<std::size_t> accepted_set(const ThresholdSweep& sweep, double coverage) {
  const auto& lv = find_level(sweep, coverage);
  std::vector<std::size_t> out(sweep.ranked.begin(),
                               sweep.ranked.begin() + static_cast<std::ptrdiff_t>(lv.accepted));
  std::sort(out.begin(), out.end());
  return out;
}

inline void write_sweep_csv(std::ostream& out, const ThresholdSweep& sweep) {
  out << "rejector,target_coverage,realized_coverage,lambda\n";
  char buf[128];
  for (const auto& lv : sweep.levels) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", lv.target_coverage,
                  lv.realized_coverage, lv.lambda);
    out << sweep.rejector << ',' << buf << '\n';
  }
}

}  // namespace csr
