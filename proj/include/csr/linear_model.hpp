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

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "csr/dataset.hpp"
#include "csr/error.hpp"
#include "csr/hyperparams.hpp"
#include "csr/pinball.hpp"

namespace csr {

/// y = intercept + <weights, x>, expressed in the caller's feature units.
struct LinearRegressor {
  double intercept = 0.0;
  std::vector<double> weights;

  std::size_t dim() const { return weights.size(); }

  double predict(std::span<const double> x) const {
    if (x.size() != weights.size()) throw DimensionError(weights.size(), x.size());
    double acc = intercept;
    for (std::size_t j = 0; j < x.size(); ++j) acc += weights[j] * x[j];
    return acc;
  }
};

namespace detail {

// Training runs on standardized features and targets so that step sizes do
// not depend on data units. theta[0] is the intercept in that space.
struct StandardizedProblem {
  Eigen::MatrixXd design;  // n x (p + 1), first column ones
  Eigen::VectorXd y;
  std::vector<double> x_mean, x_scale;
  double y_mean = 0.0, y_scale = 1.0;

  explicit StandardizedProblem(const Dataset& data) {
    const auto n = static_cast<Eigen::Index>(data.rows);
    const auto p = static_cast<Eigen::Index>(data.cols);
    const auto scaling = FeatureScaling::fit(data);
    x_mean = scaling.means;
    x_scale = scaling.scales;
    design.resize(n, p + 1);
    y.resize(n);
    double sum = 0.0;
    for (auto t : data.targets) sum += t;
    y_mean = sum / static_cast<double>(data.rows);
    double ss = 0.0;
    for (auto t : data.targets) ss += (t - y_mean) * (t - y_mean);
    const double sd = std::sqrt(ss / static_cast<double>(data.rows));
    y_scale = sd > 0.0 ? sd : 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      design(i, 0) = 1.0;
      const auto r = data.row(static_cast<std::size_t>(i));
      for (Eigen::Index j = 0; j < p; ++j) {
        design(i, j + 1) = (r[j] - x_mean[j]) / x_scale[j];
      }
      y(i) = (data.targets[static_cast<std::size_t>(i)] - y_mean) / y_scale;
    }
  }

  LinearRegressor to_model(const Eigen::VectorXd& theta) const {
    LinearRegressor m;
    const auto p = x_mean.size();
    m.weights.resize(p);
    double shift = theta(0);
    for (std::size_t j = 0; j < p; ++j) {
      const double w = theta(static_cast<Eigen::Index>(j + 1)) / x_scale[j];
      shift -= w * x_mean[j];
      m.weights[j] = w * y_scale;
    }
    m.intercept = y_mean + y_scale * shift;
    return m;
  }

  Eigen::VectorXd least_squares() const {
    return design.colPivHouseholderQr().solve(y);
  }
};

inline double mean_pinball(const Eigen::VectorXd& y, const Eigen::VectorXd& pred,
                           QuantileLevel tau) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) acc += pinball_loss(y(i), pred(i), tau);
  return acc / static_cast<double>(y.size());
}

}  // namespace detail

/// Ordinary least squares with intercept (column-pivoted QR).
inline LinearRegressor fit_least_squares(const Dataset& data) {
  validate_shape(data);
  if (data.empty()) throw DataError("cannot train on an empty dataset");
  const detail::StandardizedProblem prob(data);
  return prob.to_model(prob.least_squares());
}

/// Linear tau-quantile regression by full-batch subgradient descent on the
/// mean pinball loss. Starts from the least-squares fit with its intercept
/// shifted to the tau-quantile of the residuals; returns the best iterate seen.
inline LinearRegressor fit_linear_quantile(const Dataset& data, QuantileLevel tau,
                                           const Hyperparams& hp = {}) {
  validate_shape(data);
  if (data.empty()) throw DataError("cannot train on an empty dataset");
  const detail::StandardizedProblem prob(data);
  const double t = tau.value();
  const auto n = static_cast<double>(data.rows);

  Eigen::VectorXd theta = prob.least_squares();
  {
    Eigen::VectorXd resid = prob.y - prob.design * theta;
    std::vector<double> r(resid.data(), resid.data() + resid.size());
    theta(0) += empirical_quantile(r, t);
  }

  Eigen::VectorXd pred = prob.design * theta;
  Eigen::VectorXd best = theta;
  double best_loss = detail::mean_pinball(prob.y, pred, tau);
  Eigen::VectorXd dloss(prob.y.size());

  for (int epoch = 1; epoch <= hp.linear_epochs; ++epoch) {
    // Derivative of the pinball loss with respect to the prediction; zero is
    // taken from the subdifferential at an exact fit.
    for (Eigen::Index i = 0; i < dloss.size(); ++i) {
      const double r = prob.y(i) - pred(i);
      dloss(i) = r > 0.0 ? -t : (r < 0.0 ? 1.0 - t : 0.0);
    }
    const Eigen::VectorXd grad = prob.design.transpose() * dloss / n;
    theta -= (hp.linear_step / std::sqrt(static_cast<double>(epoch))) * grad;
    pred.noalias() = prob.design * theta;
    const double loss = detail::mean_pinball(prob.y, pred, tau);
    if (loss < best_loss) {
      best_loss = loss;
      best = theta;
    }
  }
  return prob.to_model(best);
}

}  // namespace csr
