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

#include <charconv>
#include <cstdio>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "csr/error.hpp"

namespace csr {

enum class ModelFamily { kLinear, kGbt };

inline std::string_view to_string(ModelFamily f) {
  return f == ModelFamily::kLinear ? "linear" : "gbt";
}

inline ModelFamily parse_model_family(std::string_view name) {
  if (name == "linear") return ModelFamily::kLinear;
  if (name == "gbt") return ModelFamily::kGbt;
  throw ConfigError("unknown model family '" + std::string(name) + "'");
}

/// Training budget for both model families. Keys in the flat key-value form:
///   seed, linear.epochs, linear.step,
///   gbt.trees, gbt.depth, gbt.learning_rate, gbt.subsample, gbt.min_leaf
struct Hyperparams {
  std::uint64_t seed = 0;

  int linear_epochs = 2000;
  double linear_step = 0.05;  // epoch t uses linear_step / sqrt(t)

  int gbt_trees = 200;
  int gbt_depth = 3;
  double gbt_learning_rate = 0.1;
  double gbt_subsample = 1.0;
  int gbt_min_leaf = 5;

  void set(std::string_view key, std::string_view value);

  static Hyperparams from_map(const std::map<std::string, std::string>& kv) {
    Hyperparams hp;
    for (const auto& [k, v] : kv) hp.set(k, v);
    return hp;
  }

  std::map<std::string, std::string> to_map() const;
};

namespace detail {

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("invalid value '" + std::string(text) + "' for '" +
                      std::string(key) + "'");
  }
  return value;
}

}  // namespace detail

inline void Hyperparams::set(std::string_view key, std::string_view value) {
  using detail::parse_number;
  if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "linear.epochs") linear_epochs = parse_number<int>(key, value);
  else if (key == "linear.step") linear_step = parse_number<double>(key, value);
  else if (key == "gbt.trees") gbt_trees = parse_number<int>(key, value);
  else if (key == "gbt.depth") gbt_depth = parse_number<int>(key, value);
  else if (key == "gbt.learning_rate") gbt_learning_rate = parse_number<double>(key, value);
  else if (key == "gbt.subsample") gbt_subsample = parse_number<double>(key, value);
  else if (key == "gbt.min_leaf") gbt_min_leaf = parse_number<int>(key, value);
  else throw ConfigError("unknown hyperparameter '" + std::string(key) + "'");

  if (linear_epochs < 0 || gbt_trees < 0) throw ConfigError("iteration budget must be >= 0");
  if (!(linear_step > 0.0)) throw ConfigError("linear.step must be positive");
  if (gbt_depth < 1) throw ConfigError("gbt.depth must be >= 1");
  if (!(gbt_learning_rate > 0.0)) throw ConfigError("gbt.learning_rate must be positive");
  if (!(gbt_subsample > 0.0 && gbt_subsample <= 1.0)) throw ConfigError("gbt.subsample must be in (0, 1]");
  if (gbt_min_leaf < 1) throw ConfigError("gbt.min_leaf must be >= 1");
}

inline std::map<std::string, std::string> Hyperparams::to_map() const {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  return {{"seed", std::to_string(seed)},
          {"linear.epochs", std::to_string(linear_epochs)},
          {"linear.step", num(linear_step)},
          {"gbt.trees", std::to_string(gbt_trees)},
          {"gbt.depth", std::to_string(gbt_depth)},
          {"gbt.learning_rate", num(gbt_learning_rate)},
          {"gbt.subsample", num(gbt_subsample)},
          {"gbt.min_leaf", std::to_string(gbt_min_leaf)}};
}

}  // namespace csr
