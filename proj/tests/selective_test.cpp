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

#include "csr/selective.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csr/random.hpp"
#include "gtest/gtest.h"

namespace csr {
namespace {

CsrRejector ConstantCsr(double lo, double hi, double q_hat) {
  CsrRejector r;
  r.model.alpha = 0.1;
  r.model.lower = LinearRegressor{lo, {0.0}};
  r.model.upper = LinearRegressor{hi, {0.0}};
  r.calibration.alpha = 0.1;
  r.calibration.n_cal = 1;
  r.calibration.scores = {q_hat};
  r.calibration.q_hat = q_hat;
  return r;
}

PointModel Identity() { return {ModelFamily::kLinear, LinearRegressor{0.0, {1.0}}}; }

KnnVarianceRejector TwoPointKnn() {
  Dataset d;
  d.rows = 2;
  d.cols = 1;
  d.features = {0.0, 0.1};
  d.targets = {1.0, 3.0};
  return {KnnEstimator(d, 2)};
}

const std::vector<double> kX{0.0};

TEST(Uncertainty, Examples) {
  EXPECT_EQ(uncertainty(ConstantCsr(3, 6, 0.5), kX), 4.0);
  EXPECT_EQ(uncertainty(TwoPointKnn(), kX), 1.0);
  EXPECT_TRUE(std::isinf(uncertainty(ConstantCsr(3, 6, kInfinity), kX)));
  EXPECT_THROW(uncertainty(ConstantCsr(3, 6, 0.5), std::vector<double>{1, 2}), DimensionError);
}

TEST(Decide, StrictInequality) {
  const Rejector r = ConstantCsr(3, 6, 0.5);  // W = 4
  const auto yes = decide(r, Identity(), std::vector<double>{2.0}, 5.0);
  ASSERT_FALSE(yes.rejected());
  EXPECT_EQ(yes.prediction->value, 2.0);
  ASSERT_TRUE(yes.prediction->interval.has_value());
  EXPECT_EQ(yes.prediction->interval->lower, 2.5);
  EXPECT_EQ(yes.uncertainty, 4.0);

  const auto no = decide(r, Identity(), kX, 3.0);
  EXPECT_TRUE(no.rejected());
  EXPECT_EQ(no.uncertainty, 4.0);

  EXPECT_TRUE(decide(r, Identity(), kX, 4.0).rejected());
}

TEST(Decide, UnboundedAlwaysRejected) {
  const Rejector r = ConstantCsr(3, 6, kInfinity);
  EXPECT_TRUE(decide(r, Identity(), kX, 1e300).rejected());
}

TEST(Decide, Errors) {
  const Rejector r = ConstantCsr(3, 6, 0.5);
  EXPECT_THROW(decide(r, Identity(), kX, kInfinity), ConfigError);
  EXPECT_THROW(decide(r, Identity(), kX, std::nan("")), ConfigError);
  EXPECT_THROW(decide(r, Identity(), std::vector<double>{1, 2}, 5.0), DimensionError);
}

TEST(Decide, KnnVarianceAndMidpointSource) {
  const Rejector knn = TwoPointKnn();
  const auto out = decide(knn, Identity(), std::vector<double>{0.5}, 1.5);
  ASSERT_FALSE(out.rejected());
  EXPECT_EQ(out.prediction->value, 0.5);
  EXPECT_FALSE(out.prediction->interval.has_value());

  const Rejector csr = ConstantCsr(3, 6, 0.5);
  const auto mid = decide(csr, Identity(), kX, 5.0, PredictionSource::kIntervalMidpoint);
  EXPECT_EQ(mid.prediction->value, 4.5);
}

TEST(CoverageGrid, DefaultHasTwentyLevelsEndingAtOne) {
  const auto g = coverage_grid();
  ASSERT_EQ(g.size(), 20u);
  EXPECT_NEAR(g.front(), 0.05, 1e-15);
  EXPECT_EQ(g.back(), 1.0);
  EXPECT_THROW(coverage_grid(0.0), ConfigError);
  const auto odd = coverage_grid(0.3);
  EXPECT_EQ(odd.back(), 1.0);
  EXPECT_EQ(odd.size(), 4u);
}

TEST(Sweep, HalfCoverage) {
  const std::vector<double> grid{0.5, 1.0};
  const auto sw = sweep_from_scores("t", {1, 2, 3, 4}, grid);
  EXPECT_EQ(sw.levels[0].accepted, 2u);
  EXPECT_EQ(sw.levels[0].realized_coverage, 0.5);
  EXPECT_EQ(sw.levels[0].lambda, 2.5);
  EXPECT_EQ(accepted_set(sw, 0.5), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(sw.levels[1].accepted, 4u);
  EXPECT_GT(sw.levels[1].lambda, 4.0);
  EXPECT_EQ(accepted_set(sw, 1.0).size(), 4u);
}

TEST(Sweep, AllEqualScoresUseIndexTieBreak) {
  const std::vector<double> grid{0.5};
  const auto sw = sweep_from_scores("t", {7, 7, 7, 7}, grid);
  EXPECT_EQ(accepted_set(sw, 0.5), (std::vector<std::size_t>{0, 1}));
}

TEST(Sweep, AcceptedCountMatchesBruteForce) {
  Rng rng(77);
  const auto grid = coverage_grid(0.05);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<double> scores(n);
    for (auto& s : scores) s = static_cast<double>(rng.below(4));
    const auto sw = sweep_from_scores("t", scores, grid);
    for (double c : grid) {
      // Smallest m with m >= c * n, counted upward.
      std::size_t m = 0;
      while (static_cast<double>(m) < c * static_cast<double>(n) - 1e-9) ++m;
      const auto acc = accepted_set(sw, c);
      EXPECT_EQ(acc.size(), m);
      // Every accepted score <= every rejected score.
      double max_acc = -kInfinity, min_rej = kInfinity;
      for (std::size_t i = 0; i < n; ++i) {
        if (std::binary_search(acc.begin(), acc.end(), i)) {
          max_acc = std::max(max_acc, scores[i]);
        } else {
          min_rej = std::min(min_rej, scores[i]);
        }
      }
      EXPECT_LE(max_acc, min_rej);
    }
  }
}

TEST(AcceptedSet, Examples) {
  const std::vector<double> grid{0.0, 2.0 / 3.0, 1.0};
  const auto sw = sweep_from_scores("t", {3, 1, 2}, grid);
  EXPECT_TRUE(accepted_set(sw, 0.0).empty());
  EXPECT_EQ(accepted_set(sw, 2.0 / 3.0), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(accepted_set(sw, 1.0), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_THROW(accepted_set(sw, 0.5), ConfigError);
}

TEST(Sweep, ZeroCoverageRejectsEverythingViaDecide) {
  const std::vector<double> grid{0.0, 1.0};
  const auto sw = sweep_from_scores("t", {3, 1, 2}, grid);
  EXPECT_EQ(sw.levels[0].lambda, 1.0);  // strict "<" rejects the minimum too
}

TEST(Sweep, InfiniteScores) {
  const std::vector<double> grid{0.5, 1.0};
  const auto sw = sweep_from_scores("t", {kInfinity, kInfinity}, grid);
  EXPECT_EQ(accepted_set(sw, 0.5).size(), 1u);
  EXPECT_TRUE(std::isinf(sw.levels[1].lambda));
  const auto mixed = sweep_from_scores("t", {1.0, kInfinity}, grid);
  EXPECT_TRUE(std::isfinite(mixed.levels[0].lambda));
  EXPECT_GT(mixed.levels[0].lambda, 1.0);
}

TEST(Sweep, Errors) {
  const std::vector<double> bad_order{0.5, 0.2};
  const std::vector<double> out_of_range{0.5, 1.2};
  EXPECT_THROW(sweep_from_scores("t", {1, 2}, bad_order), ConfigError);
  EXPECT_THROW(sweep_from_scores("t", {1, 2}, out_of_range), ConfigError);
  const std::vector<double> grid{1.0};
  EXPECT_THROW(sweep_from_scores("t", {}, grid), DataError);
}

TEST(Sweep, NestedAcrossGrid) {
  Rng rng(3);
  const auto grid = coverage_grid(0.05);
  std::vector<double> scores(173);
  for (auto& s : scores) s = std::floor(rng.uniform(0, 10));
  const auto sw = sweep_from_scores("t", scores, grid);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const auto a = accepted_set(sw, grid[i - 1]);
    const auto b = accepted_set(sw, grid[i]);
    EXPECT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
  }
}

TEST(Sweep, DecideAtLambdaReproducesAcceptedSet) {
  const auto train = generate_synthetic({600, NoiseProfile::kHeteroscedasticLinear, 1});
  const auto cal = generate_synthetic({200, NoiseProfile::kHeteroscedasticLinear, 2});
  const auto test = generate_synthetic({300, NoiseProfile::kHeteroscedasticLinear, 3});
  const auto pair = train_quantile_pair(train, 0.1, ModelFamily::kLinear);
  const auto point = train_point_model(train, ModelFamily::kLinear);
  const std::vector<Rejector> rejectors{CsrRejector{pair, calibrate(pair, cal, 0.1)},
                                        KnnVarianceRejector{KnnEstimator(concat(train, cal), 10)}};
  const auto grid = coverage_grid(0.05);
  for (const auto& rej : rejectors) {
    const auto sw = sweep_thresholds(rej, test, grid);
    int untied = 0;
    for (const auto& lv : sw.levels) {
      const auto acc = accepted_set(sw, lv.target_coverage);
      // A threshold cannot split tied scores; there decide() may accept
      // extra rows, but never drop an accepted one.
      const bool tied = lv.accepted > 0 && lv.accepted < test.rows &&
                        sw.scores[sw.ranked[lv.accepted - 1]] == sw.scores[sw.ranked[lv.accepted]];
      untied += !tied;
      for (std::size_t i = 0; i < test.rows; ++i) {
        const bool predicted = !decide(rej, point, test.row(i), lv.lambda).rejected();
        const bool accepted = std::binary_search(acc.begin(), acc.end(), i);
        if (tied) {
          EXPECT_TRUE(predicted || !accepted);
        } else {
          EXPECT_EQ(predicted, accepted)
              << rejector_name(rej) << " c=" << lv.target_coverage << " row " << i;
        }
      }
    }
    EXPECT_GT(untied, 10) << rejector_name(rej);
  }
}

TEST(Sweep, CsrPrefersLowNoiseRegionOnStepData) {
  int majority = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto train = generate_synthetic({1500, NoiseProfile::kHeteroscedasticStep, 100 + s});
    const auto cal = generate_synthetic({300, NoiseProfile::kHeteroscedasticStep, 200 + s});
    const auto test = generate_synthetic({600, NoiseProfile::kHeteroscedasticStep, 300 + s});
    const auto pair = train_quantile_pair(train, 0.05, ModelFamily::kGbt);
    const Rejector rej = CsrRejector{pair, calibrate(pair, cal, 0.05)};
    const std::vector<double> grid{0.5};
    const auto acc = accepted_set(sweep_thresholds(rej, test, grid), 0.5);
    std::size_t low = 0;
    for (auto i : acc) low += test.row(i)[0] < 2.5;
    majority += 2 * low > acc.size();
  }
  EXPECT_EQ(majority, 20);
}

TEST(SweepCsv, Format) {
  const std::vector<double> grid{0.5, 1.0};
  const auto sw = sweep_from_scores("csr", {1, 2, 3, 4}, grid);
  std::ostringstream out;
  write_sweep_csv(out, sw);
  EXPECT_EQ(out.str(),
            "rejector,target_coverage,realized_coverage,lambda\n"
            "csr,0.5,0.5,2.5\n"
            "csr,1,1,5.5\n");
}

}  // namespace
}  // namespace csr
