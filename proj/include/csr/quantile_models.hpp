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

#include <span>
#include <string>
#include <type_traits>
#include <variant>

#include <json.hpp>

#include "csr/boosted_trees.hpp"
#include "csr/dataset.hpp"
#include "csr/error.hpp"
#include "csr/hyperparams.hpp"
#include "csr/knn.hpp"
#include "csr/linear_model.hpp"
#include "csr/pinball.hpp"

namespace csr {

using Regressor = std::variant<LinearRegressor, BoostedTrees>;

inline double predict(const Regressor& r, std::span<const double> x) {
  return std::visit([&](const auto& m) { return m.predict(x); }, r);
}

inline std::size_t input_dim(const Regressor& r) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LinearRegressor>) {
          return m.dim();
        } else {
          return m.dim;
        }
      },
      r);
}

/// Mean regressor f(X) whose predictions every rejector gates.
struct PointModel {
  ModelFamily family = ModelFamily::kLinear;
  Regressor regressor;

  double predict(std::span<const double> x) const { return csr::predict(regressor, x); }
  std::size_t dim() const { return input_dim(regressor); }
};

/// Lower and upper conditional-quantile regressors at levels alpha/2 and
/// 1 - alpha/2, trained on the same data.
struct QuantilePairModel {
  double alpha = 0.05;
  ModelFamily family = ModelFamily::kLinear;
  Regressor lower;
  Regressor upper;

  QuantileLevel lower_level() const { return QuantileLevel(alpha / 2.0); }
  QuantileLevel upper_level() const { return QuantileLevel(1.0 - alpha / 2.0); }

  double predict_lower(std::span<const double> x) const { return csr::predict(lower, x); }
  double predict_upper(std::span<const double> x) const { return csr::predict(upper, x); }
  std::size_t dim() const { return input_dim(lower); }
};

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

namespace detail {
inline constexpr std::uint64_t kPointStream = 0;
inline constexpr std::uint64_t kLowerStream = 1;
inline constexpr std::uint64_t kUpperStream = 2;

inline Regressor fit_quantile(const Dataset& train, QuantileLevel tau, ModelFamily family,
                              const Hyperparams& hp, std::uint64_t stream) {
  if (family == ModelFamily::kLinear) return fit_linear_quantile(train, tau, hp);
  return fit_boosted_trees(train, BoostLoss::kQuantile, tau, hp, stream);
}
}  // namespace detail

inline PointModel train_point_model(const Dataset& train, ModelFamily family,
                                    const Hyperparams& hp = {}) {
  if (train.empty()) throw DataError("cannot train on an empty dataset");
  PointModel m;
  m.family = family;
  if (family == ModelFamily::kLinear) {
    m.regressor = fit_least_squares(train);
  } else {
    m.regressor = fit_boosted_trees(train, BoostLoss::kSquared, std::nullopt, hp,
                                    detail::kPointStream);
  }
  return m;
}

inline QuantilePairModel train_quantile_pair(const Dataset& train, double alpha,
                                             ModelFamily family, const Hyperparams& hp = {}) {
  check_alpha(alpha);
  if (train.empty()) throw DataError("cannot train on an empty dataset");
  QuantilePairModel m;
  m.alpha = alpha;
  m.family = family;
  m.lower = detail::fit_quantile(train, m.lower_level(), family, hp, detail::kLowerStream);
  m.upper = detail::fit_quantile(train, m.upper_level(), family, hp, detail::kUpperStream);
  return m;
}

// ---------------------------------------------------------------------------
// JSON documents. Every top-level document carries "schema".

inline constexpr const char* kModelSchema = "csr.model/1";

inline nlohmann::json regressor_to_json(const Regressor& r) {
  using nlohmann::json;
  if (const auto* lin = std::get_if<LinearRegressor>(&r)) {
    return json{{"type", "linear"}, {"intercept", lin->intercept}, {"weights", lin->weights}};
  }
  const auto& gbt = std::get<BoostedTrees>(r);
  json trees = json::array();
  for (const auto& t : gbt.trees) {
    json nodes = json::array();
    for (const auto& nd : t.nodes) {
      nodes.push_back(nd.is_leaf() ? json::array({nd.value})
                                   : json::array({nd.feature, nd.threshold, nd.left, nd.right}));
    }
    trees.push_back(std::move(nodes));
  }
  return json{{"type", "gbt"},
              {"dim", gbt.dim},
              {"base", gbt.base},
              {"learning_rate", gbt.learning_rate},
              {"trees", std::move(trees)}};
}

inline Regressor regressor_from_json(const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "linear") {
    LinearRegressor m;
    m.intercept = j.at("intercept").get<double>();
    m.weights = j.at("weights").get<std::vector<double>>();
    return m;
  }
  if (type != "gbt") throw DataError("unknown regressor type '" + type + "'");
  BoostedTrees m;
  m.dim = j.at("dim").get<std::size_t>();
  m.base = j.at("base").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  for (const auto& jt : j.at("trees")) {
    RegressionTree t;
    for (const auto& jn : jt) {
      TreeNode nd;
      if (jn.size() == 1) {
        nd.value = jn[0].get<double>();
      } else {
        nd.feature = jn[0].get<int>();
        nd.threshold = jn[1].get<double>();
        nd.left = jn[2].get<int>();
        nd.right = jn[3].get<int>();
      }
      t.nodes.push_back(nd);
    }
    m.trees.push_back(std::move(t));
  }
  return m;
}

inline nlohmann::json to_json(const PointModel& m) {
  return {{"schema", kModelSchema},
          {"kind", "point"},
          {"family", to_string(m.family)},
          {"regressor", regressor_to_json(m.regressor)}};
}

inline nlohmann::json to_json(const QuantilePairModel& m) {
  return {{"schema", kModelSchema},
          {"kind", "quantile_pair"},
          {"family", to_string(m.family)},
          {"alpha", m.alpha},
          {"lower", regressor_to_json(m.lower)},
          {"upper", regressor_to_json(m.upper)}};
}

namespace detail {
inline void expect_schema(const nlohmann::json& j, std::string_view schema,
                          std::string_view kind) {
  if (j.value("schema", "") != schema) {
    throw DataError("unsupported document schema; expected " + std::string(schema));
  }
  if (!kind.empty() && j.value("kind", "") != kind) {
    throw DataError("document is not a " + std::string(kind) + " model");
  }
}
}  // namespace detail

inline PointModel point_model_from_json(const nlohmann::json& j) {
  detail::expect_schema(j, kModelSchema, "point");
  return {parse_model_family(j.at("family").get<std::string>()),
          regressor_from_json(j.at("regressor"))};
}

inline QuantilePairModel quantile_pair_from_json(const nlohmann::json& j) {
  detail::expect_schema(j, kModelSchema, "quantile_pair");
  QuantilePairModel m;
  m.alpha = j.at("alpha").get<double>();
  check_alpha(m.alpha);
  m.family = parse_model_family(j.at("family").get<std::string>());
  m.lower = regressor_from_json(j.at("lower"));
  m.upper = regressor_from_json(j.at("upper"));
  return m;
}

}  // namespace csr
