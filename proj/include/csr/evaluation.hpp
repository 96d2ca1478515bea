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
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "csr/error.hpp"
#include "csr/selective.hpp"

namespace csr {

struct CurvePoint {
  double coverage = 0.0;
  double mse = 0.0;
  double nmse = std::numeric_limits<double>::quiet_NaN();  // set by normalize()
};

/// Selective error as a function of coverage for one rejector.
struct CoverageErrorCurve {
  std::string method;
  std::string dataset;
  std::vector<CurvePoint> points;  // strictly ascending coverage
  double normalizer = std::numeric_limits<double>::quiet_NaN();
};

inline constexpr std::array<double, 4> kRestrictedLevels{0.8, 0.85, 0.9, 0.95};

inline double mse_at_coverage(std::span<const double> targets,
                              std::span<const double> predictions,
                              std::span<const std::size_t> accepted) {
  if (targets.size() != predictions.size()) {
    throw DimensionError(targets.size(), predictions.size());
  }
  if (accepted.empty()) throw DataError("MSE is undefined over an empty accepted set");
  double acc = 0.0;
  for (const auto i : accepted) {
    if (i >= targets.size()) throw DataError("accepted index out of range");
    const double r = targets[i] - predictions[i];
    acc += r * r;
  }
  return acc / static_cast<double>(accepted.size());
}

/// One point per grid level with a non-empty accepted set, at its realized
/// coverage. Levels whose realized coverage repeats the previous one are
/// skipped so coverages stay strictly ascending.
inline CoverageErrorCurve build_curve(const ThresholdSweep& sweep,
                                      std::span<const double> targets,
                                      std::span<const double> predictions,
                                      std::string dataset) {
  if (targets.size() != sweep.size()) throw DimensionError(sweep.size(), targets.size());
  CoverageErrorCurve curve;
  curve.method = sweep.rejector;
  curve.dataset = std::move(dataset);
  for (const auto& lv : sweep.levels) {
    if (lv.accepted == 0) continue;
    if (!curve.points.empty() && !(lv.realized_coverage > curve.points.back().coverage)) continue;
    const auto acc = accepted_set(sweep, lv.target_coverage);
    curve.points.push_back({lv.realized_coverage, mse_at_coverage(targets, predictions, acc)});
  }
  return curve;
}

/// Divides every MSE by the largest MSE over all points of all curves.
inline std::vector<CoverageErrorCurve> normalize(std::vector<CoverageErrorCurve> curves) {
  double top = 0.0;
  for (const auto& c : curves) {
    for (const auto& p : c.points) top = std::max(top, p.mse);
  }
  for (auto& c : curves) {
    c.normalizer = top;
    for (auto& p : c.points) p.nmse = top > 0.0 ? p.mse / top : 0.0;
  }
  return curves;
}

struct IdealDistance {
  double distance = 0.0;
  CurvePoint best;
};

/// Closest curve point to the ideal (coverage 1, nMSE 0). Equal distances go
/// to the higher coverage.
inline IdealDistance distance_to_ideal(std::span<const CurvePoint> points) {
  if (points.empty()) throw DataError("curve has no points");
  IdealDistance out{std::numeric_limits<double>::infinity(), {}};
  for (const auto& p : points) {
    const double d = std::sqrt((1.0 - p.coverage) * (1.0 - p.coverage) + p.nmse * p.nmse);
    if (d < out.distance || (d == out.distance && p.coverage > out.best.coverage)) {
      out = {d, p};
    }
  }
  return out;
}

inline IdealDistance distance_to_ideal(const CoverageErrorCurve& curve) {
  return distance_to_ideal(curve.points);
}

/// Trapezoidal area under nMSE(coverage) divided by the coverage span, so a
/// constant curve scores its constant.
inline double curve_auc(std::span<const CurvePoint> points) {
  if (points.size() < 2) throw DataError("AUC needs at least two curve points");
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double dx = points[i].coverage - points[i - 1].coverage;
    area += dx * (points[i].nmse + points[i - 1].nmse) / 2.0;
  }
  const double span = points.back().coverage - points.front().coverage;
  if (!(span > 0.0)) throw DataError("AUC needs a positive coverage span");
  return area / span;
}

inline double curve_auc(const CoverageErrorCurve& curve) { return curve_auc(curve.points); }

/// nMSE at an arbitrary coverage by linear interpolation between grid points.
inline double nmse_at(const CoverageErrorCurve& curve, double level) {
  const auto& pts = curve.points;
  if (pts.empty() || level < pts.front().coverage - 1e-12 ||
      level > pts.back().coverage + 1e-12) {
    throw DataError("coverage level " + std::to_string(level) + " lies outside the curve of '" +
                    curve.method + "'");
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (std::abs(pts[i].coverage - level) <= 1e-12) return pts[i].nmse;
    if (i + 1 < pts.size() && level < pts[i + 1].coverage) {
      const double w = (level - pts[i].coverage) / (pts[i + 1].coverage - pts[i].coverage);
      return pts[i].nmse + w * (pts[i + 1].nmse - pts[i].nmse);
    }
  }
  return pts.back().nmse;
}

struct EvalSummary {
  std::string method;
  double auc = 0.0;
  CurvePoint best;
  double distance = 0.0;
  std::vector<std::pair<double, double>> restricted;  // (level, nmse)
};

inline EvalSummary summarize(const CoverageErrorCurve& curve,
                             std::span<const double> levels = kRestrictedLevels) {
  EvalSummary s;
  s.method = curve.method;
  s.auc = curve_auc(curve);
  const auto ideal = distance_to_ideal(curve);
  s.distance = ideal.distance;
  s.best = ideal.best;
  for (const double lv : levels) s.restricted.emplace_back(lv, nmse_at(curve, lv));
  return s;
}

struct RestrictedRow {
  double level = 0.0;
  std::vector<std::pair<std::string, double>> nmse;  // per method, input order
  std::string winner;
};

/// Per level, the method with the lowest nMSE; ties go to the earlier method.
inline std::vector<RestrictedRow> restricted_comparison(
    std::span<const EvalSummary> summaries, std::span<const double> levels = kRestrictedLevels) {
  std::vector<RestrictedRow> table;
  for (const double lv : levels) {
    RestrictedRow row;
    row.level = lv;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : summaries) {
      const auto it = std::find_if(s.restricted.begin(), s.restricted.end(),
                                   [&](const auto& e) { return std::abs(e.first - lv) <= 1e-12; });
      if (it == s.restricted.end()) {
        throw DataError("summary of '" + s.method + "' has no entry at level " +
                        std::to_string(lv));
      }
      row.nmse.emplace_back(s.method, it->second);
      if (it->second < best) {
        best = it->second;
        row.winner = s.method;
      }
    }
    table.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Output formats

inline constexpr const char* kCurveSchema = "csr.curve/1";
inline constexpr const char* kSummarySchema = "csr.summary/1";

/// Curve CSV; the first line is a "# schema=" comment.
inline void write_curve_csv(std::ostream& out, const CoverageErrorCurve& curve) {
  out << "# schema=" << kCurveSchema << '\n';
  out << "method,dataset,coverage,mse,nmse\n";
  char buf[128];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", p.coverage, p.mse, p.nmse);
    out << curve.method << ',' << curve.dataset << ',' << buf << '\n';
  }
}

inline std::string level_key(double level) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", level);
  return buf;
}

inline nlohmann::json summary_to_json(const std::string& dataset, std::uint64_t seed,
                                      double normalizer, std::span<const EvalSummary> summaries,
                                      std::span<const RestrictedRow> table) {
  using nlohmann::json;
  json methods = json::object();
  for (const auto& s : summaries) {
    json restricted = json::object();
    for (const auto& [lv, v] : s.restricted) restricted[level_key(lv)] = v;
    methods[s.method] = {{"auc", s.auc},
                         {"best_coverage", s.best.coverage},
                         {"best_nmse", s.best.nmse},
                         {"distance", s.distance},
                         {"restricted", std::move(restricted)}};
  }
  json rows = json::array();
  for (const auto& r : table) {
    json vals = json::object();
    for (const auto& [m, v] : r.nmse) vals[m] = v;
    rows.push_back({{"level", r.level}, {"winner", r.winner}, {"nmse", std::move(vals)}});
  }
  return {{"schema", kSummarySchema}, {"dataset", dataset},     {"seed", seed},
          {"normalizer", normalizer}, {"methods", std::move(methods)},
          {"restricted", std::move(rows)}};
}

}  // namespace csr
