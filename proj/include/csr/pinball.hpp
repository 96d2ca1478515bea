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
#include <span>
#include <string>
#include <vector>

#include "csr/error.hpp"

namespace csr {

/// A quantile level tau, strictly inside (0, 1).
class QuantileLevel {
 public:
  explicit QuantileLevel(double tau) : tau_(tau) {
    if (!(tau > 0.0 && tau < 1.0)) {
      throw ConfigError("quantile level must lie in (0, 1), got " +
                        std::to_string(tau));
    }
  }
  double value() const { return tau_; }

 private:
  double tau_;
};

/// Pinball (check) loss; minimized in expectation by the tau-quantile of y.
inline double pinball_loss(double y, double y_hat, QuantileLevel tau) {
  const double t = tau.value();
  return y >= y_hat ? t * (y - y_hat) : (1.0 - t) * (y_hat - y);
}

/// Lower empirical tau-quantile: the ceil(tau * n)-th smallest value (1-based),
/// which minimizes the summed pinball loss over the sample. Reorders `values`.
inline double empirical_quantile(std::span<double> values, double tau) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(n) - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, n);
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(values.begin(), nth, values.end());
  return *nth;
}

}  // namespace csr
