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
#include <limits>
#include <span>
#include <vector>

#include <json.hpp>

#include "csr/dataset.hpp"
#include "csr/error.hpp"
#include "csr/quantile_models.hpp"

namespace csr {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Signed distance of y outside [lower, upper]; negative when strictly inside.
inline double conformity_score(double y, double lower_raw, double upper_raw) {
  return std::max(y - upper_raw, lower_raw - y);
}

/// 1-based rank ceil((n + 1)(1 - alpha)) of the calibration threshold among
/// ascending scores. The tolerance keeps products such as 10 * 0.9 from
/// rounding up past an exact integer.
inline std::size_t conformal_rank(std::size_t n, double alpha) {
  const double x = static_cast<double>(n + 1) * (1.0 - alpha);
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

struct ConformalCalibration {
  double alpha = 0.05;
  std::vector<double> scores;  // calibration order
  double q_hat = kInfinity;    // +inf when the rank exceeds n_cal
  std::size_t n_cal = 0;

  bool unbounded() const { return std::isinf(q_hat); }
};

/// Threshold from precomputed scores: the k-th smallest score with
/// k = conformal_rank(n, alpha), or +inf when k > n. Ties keep multiplicity.
inline ConformalCalibration calibrate_scores(std::vector<double> scores, double alpha) {
  check_alpha(alpha);
  if (scores.empty()) throw DataError("calibration set is empty");
  ConformalCalibration c;
  c.alpha = alpha;
  c.n_cal = scores.size();
  const auto k = conformal_rank(c.n_cal, alpha);
  if (k >= 1 && k <= c.n_cal) {
    std::vector<double> sorted = scores;
    auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(k - 1);
    std::nth_element(sorted.begin(), nth, sorted.end());
    c.q_hat = *nth;
  } else if (k == 0) {
    // alpha close to 1 with tiny n: every score qualifies; use the smallest.
    c.q_hat = *std::min_element(scores.begin(), scores.end());
  }
  c.scores = std::move(scores);
  return c;
}

struct RawBounds {
  double lower;
  double upper;
};

/// Quantile-pair bounds at x; crossed bounds collapse to their midpoint.
inline RawBounds raw_bounds(const QuantilePairModel& model, std::span<const double> x) {
  double lo = model.predict_lower(x);
  double hi = model.predict_upper(x);
  if (lo > hi) lo = hi = lo + (hi - lo) / 2.0;
  return {lo, hi};
}

inline ConformalCalibration calibrate(const QuantilePairModel& model, const Dataset& cal,
                                      double alpha) {
  check_alpha(alpha);
  if (cal.empty()) throw DataError("calibration set is empty");
  if (cal.cols != model.dim()) throw DimensionError(model.dim(), cal.cols);
  std::vector<double> scores(cal.rows);
  for (std::size_t i = 0; i < cal.rows; ++i) {
    const auto b = raw_bounds(model, cal.row(i));
    scores[i] = conformity_score(cal.targets[i], b.lower, b.upper);
  }
  return calibrate_scores(std::move(scores), alpha);
}

struct PredictionInterval {
  double lower = 0.0;
  double upper = 0.0;
  double width = 0.0;

  bool unbounded() const { return std::isinf(width); }
  bool contains(double y) const { return lower <= y && y <= upper; }
};

/// [lower - q_hat, upper + q_hat], so width = raw width + 2 q_hat. A negative
/// q_hat larger than half the raw width would invert the bounds; such an
/// interval collapses to its midpoint with width 0.
inline PredictionInterval conformalize(RawBounds raw, double q_hat) {
  if (std::isinf(q_hat)) return {-kInfinity, kInfinity, kInfinity};
  PredictionInterval iv{raw.lower - q_hat, raw.upper + q_hat, 0.0};
  if (iv.lower > iv.upper) iv.lower = iv.upper = iv.lower + (iv.upper - iv.lower) / 2.0;
  iv.width = (raw.upper - raw.lower) + 2.0 * q_hat;
  iv.width = std::max(iv.width, 0.0);
  return iv;
}

inline PredictionInterval conformal_interval(const QuantilePairModel& model,
                                             const ConformalCalibration& calib,
                                             std::span<const double> x) {
  if (x.size() != model.dim()) throw DimensionError(model.dim(), x.size());
  return conformalize(raw_bounds(model, x), calib.q_hat);
}

/// Fraction of test rows whose target lies inside its conformal interval.
inline double empirical_coverage(const QuantilePairModel& model,
                                 const ConformalCalibration& calib, const Dataset& test) {
  if (test.empty()) throw DataError("test set is empty");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < test.rows; ++i) {
    if (conformal_interval(model, calib, test.row(i)).contains(test.targets[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test.rows);
}

inline constexpr const char* kCalibrationSchema = "csr.calibration/1";

// q_hat is written as null when unbounded; JSON has no infinity.
inline nlohmann::json to_json(const ConformalCalibration& c, bool include_scores = true) {
  nlohmann::json j{{"schema", kCalibrationSchema},
                   {"alpha", c.alpha},
                   {"n_cal", c.n_cal},
                   {"rank", conformal_rank(c.n_cal, c.alpha)},
                   {"unbounded", c.unbounded()},
                   {"q_hat", nullptr}};
  if (!c.unbounded()) j["q_hat"] = c.q_hat;
  if (include_scores) j["scores"] = c.scores;
  return j;
}

inline ConformalCalibration calibration_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != kCalibrationSchema) {
    throw DataError("unsupported calibration schema");
  }
  ConformalCalibration c;
  c.alpha = j.at("alpha").get<double>();
  c.n_cal = j.at("n_cal").get<std::size_t>();
  c.q_hat = j.at("q_hat").is_null() ? kInfinity : j.at("q_hat").get<double>();
  if (j.contains("scores")) {
    c.scores = j.at("scores").get<std::vector<double>>();
    if (c.scores.size() != c.n_cal) throw DataError("n_cal does not match score count");
  }
  return c;
}

}  // namespace csr
