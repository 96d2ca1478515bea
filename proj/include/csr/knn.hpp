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
#include <span>
#include <utility>
#include <vector>

#include "csr/dataset.hpp"
#include "csr/error.hpp"

namespace csr {

struct MeanVariance {
  double mean = 0.0;
  double variance = 0.0;
};

/// Exact k-nearest-neighbour estimator of E[Y | X] and Var(Y | X) under
/// Euclidean distance. Linear scan; equal distances resolve to the lower
/// stored row index.
class KnnEstimator {
 public:
  KnnEstimator(Dataset stored, std::size_t k) : data_(std::move(stored)), k_(k) {
    validate_shape(data_);
    if (k_ == 0) throw ConfigError("k must be positive");
    if (k_ > data_.rows) {
      throw ConfigError("k = " + std::to_string(k_) + " exceeds the " +
                        std::to_string(data_.rows) + " stored rows");
    }
  }

  std::size_t k() const { return k_; }
  std::size_t dim() const { return data_.cols; }
  const Dataset& stored() const { return data_; }

  /// Stored row indices of the k nearest neighbours, nearest first.
  std::vector<std::size_t> neighbours(std::span<const double> x) const {
    if (x.size() != data_.cols) throw DimensionError(data_.cols, x.size());
    std::vector<std::pair<double, std::size_t>> dist(data_.rows);
    for (std::size_t i = 0; i < data_.rows; ++i) {
      const auto r = data_.row(i);
      double d = 0.0;
      for (std::size_t j = 0; j < r.size(); ++j) d += (r[j] - x[j]) * (r[j] - x[j]);
      dist[i] = {d, i};
    }
    const auto kth = dist.begin() + static_cast<std::ptrdiff_t>(k_);
    std::partial_sort(dist.begin(), kth, dist.end());
    std::vector<std::size_t> out(k_);
    for (std::size_t i = 0; i < k_; ++i) out[i] = dist[i].second;
    return out;
  }

  /// Mean and population variance (divisor k) of the neighbours' targets.
  MeanVariance mean_variance(std::span<const double> x) const {
    const auto idx = neighbours(x);
    double sum = 0.0;
    for (auto i : idx) sum += data_.targets[i];
    const double mean = sum / static_cast<double>(k_);
    double ss = 0.0;
    for (auto i : idx) ss += (data_.targets[i] - mean) * (data_.targets[i] - mean);
    return {mean, ss / static_cast<double>(k_)};
  }

 private:
  Dataset data_;
  std::size_t k_;
};

inline MeanVariance knn_mean_variance(const KnnEstimator& est, std::span<const double> x) {
  return est.mean_variance(x);
}

}  // namespace csr
