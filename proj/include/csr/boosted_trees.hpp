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
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "csr/dataset.hpp"
#include "csr/error.hpp"
#include "csr/hyperparams.hpp"
#include "csr/pinball.hpp"
#include "csr/random.hpp"

namespace csr {

/// Internal nodes have feature >= 0 and route x[feature] <= threshold left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  int leaf_index(std::span<const double> x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& nd = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return i;
  }

  double predict(std::span<const double> x) const {
    return nodes[static_cast<std::size_t>(leaf_index(x))].value;
  }
};

enum class BoostLoss { kSquared, kQuantile };

/// Additive tree ensemble: base + learning_rate * sum of tree outputs.
struct BoostedTrees {
  std::size_t dim = 0;
  double base = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;

  double predict(std::span<const double> x) const {
    if (x.size() != dim) throw DimensionError(dim, x.size());
    double acc = 0.0;
    for (const auto& t : trees) acc += t.predict(x);
    return base + learning_rate * acc;
  }
};

namespace detail {

// Grows one least-squares regression tree on `grad` over the rows flagged in
// `in_sample`, level by level. Each level makes a single pass over every
// presorted feature column. On return `node_of` maps sample rows to leaves.
class TreeGrower {
 public:
  TreeGrower(const Dataset& data, const std::vector<std::vector<std::uint32_t>>& sorted,
             int max_depth, std::size_t min_leaf)
      : data_(data), sorted_(sorted), max_depth_(max_depth), min_leaf_(min_leaf) {}

  RegressionTree grow(std::span<const double> grad, const std::vector<char>& in_sample,
                      std::vector<int>& node_of) const {
    const auto n = data_.rows;
    RegressionTree tree;
    tree.nodes.emplace_back();
    node_of.assign(n, -1);
    NodeStats root;
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_sample[i]) continue;
      node_of[i] = 0;
      root.add(grad[i]);
    }
    std::vector<int> frontier{0};
    std::vector<NodeStats> frontier_stats{root};

    for (int depth = 0; depth < max_depth_ && !frontier.empty(); ++depth) {
      std::vector<int> slot_of(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        slot_of[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
      }
      std::vector<Candidate> best(frontier.size());
      std::vector<Scan> scan(frontier.size());

      for (std::size_t f = 0; f < data_.cols; ++f) {
        for (auto& sc : scan) sc = Scan{};
        for (const auto i : sorted_[f]) {
          const int nd = node_of[i];
          if (nd < 0) continue;
          const int s = slot_of[static_cast<std::size_t>(nd)];
          if (s < 0) continue;
          auto& sc = scan[static_cast<std::size_t>(s)];
          const double v = data_.features[i * data_.cols + f];
          if (sc.left.count > 0 && v > sc.last) {
            consider(frontier_stats[static_cast<std::size_t>(s)], sc.left, sc.last, v,
                     static_cast<int>(f), best[static_cast<std::size_t>(s)]);
          }
          sc.left.add(grad[i]);
          sc.last = v;
        }
      }

      std::vector<int> next;
      std::vector<NodeStats> next_stats;
      bool any_split = false;
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        const auto& b = best[s];
        const auto& st = frontier_stats[s];
        if (b.feature < 0 || !(b.gain > 1e-12 * std::max(st.sum_sq, 1e-300))) continue;
        const int id = frontier[s];
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        auto& nd = tree.nodes[static_cast<std::size_t>(id)];
        nd.feature = b.feature;
        nd.threshold = b.threshold;
        nd.left = left;
        nd.right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
        next_stats.push_back(b.left);
        next_stats.push_back(st.minus(b.left));
        any_split = true;
      }
      if (!any_split) break;
      for (std::size_t i = 0; i < n; ++i) {
        const int nd = node_of[i];
        if (nd < 0) continue;
        const auto& node = tree.nodes[static_cast<std::size_t>(nd)];
        if (node.is_leaf()) continue;
        const double v = data_.features[i * data_.cols + static_cast<std::size_t>(node.feature)];
        node_of[i] = v <= node.threshold ? node.left : node.right;
      }
      frontier = std::move(next);
      frontier_stats = std::move(next_stats);
    }
    return tree;
  }

 private:
  struct NodeStats {
    std::size_t count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
    void add(double g) {
      ++count;
      sum += g;
      sum_sq += g * g;
    }
    NodeStats minus(const NodeStats& o) const {
      return {count - o.count, sum - o.sum, sum_sq - o.sum_sq};
    }
  };
  struct Candidate {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
    NodeStats left;
  };
  struct Scan {
    NodeStats left;
    double last = 0.0;
  };

  void consider(const NodeStats& total, const NodeStats& left, double lo, double hi,
                int feature, Candidate& best) const {
    const auto n_left = left.count;
    const auto n_right = total.count - n_left;
    if (n_left < min_leaf_ || n_right < min_leaf_) return;
    const double s_right = total.sum - left.sum;
    const double gain = left.sum * left.sum / static_cast<double>(n_left) +
                        s_right * s_right / static_cast<double>(n_right) -
                        total.sum * total.sum / static_cast<double>(total.count);
    if (gain > best.gain) {
      double thr = lo + (hi - lo) / 2.0;
      if (!(thr < hi)) thr = lo;
      best = {feature, thr, gain, left};
    }
  }

  const Dataset& data_;
  const std::vector<std::vector<std::uint32_t>>& sorted_;
  int max_depth_;
  std::size_t min_leaf_;
};

}  // namespace detail

/// Gradient boosting with regression trees. Squared loss fits leaf means of
/// the residuals; quantile loss fits trees to the pinball negative gradient
/// and then sets each leaf to the tau-quantile of its residuals.
inline BoostedTrees fit_boosted_trees(const Dataset& data, BoostLoss loss,
                                      std::optional<QuantileLevel> tau,
                                      const Hyperparams& hp, std::uint64_t stream) {
  validate_shape(data);
  if (data.empty()) throw DataError("cannot train on an empty dataset");
  if (loss == BoostLoss::kQuantile && !tau) throw ConfigError("quantile loss needs a level");
  const auto n = data.rows;
  const double t = tau ? tau->value() : 0.5;

  BoostedTrees model;
  model.dim = data.cols;
  model.learning_rate = hp.gbt_learning_rate;
  {
    std::vector<double> y = data.targets;
    model.base = loss == BoostLoss::kSquared
                     ? std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n)
                     : empirical_quantile(y, t);
  }

  std::vector<std::vector<std::uint32_t>> sorted(data.cols);
  for (std::size_t f = 0; f < data.cols; ++f) {
    auto& idx = sorted[f];
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0U);
    std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
      return data.features[a * data.cols + f] < data.features[b * data.cols + f];
    });
  }

  const detail::TreeGrower grower(data, sorted, hp.gbt_depth,
                                  static_cast<std::size_t>(hp.gbt_min_leaf));
  Rng rng(derive_seed(hp.seed, stream));
  std::vector<double> fitted(n, model.base), grad(n), resid;
  std::vector<char> in_sample(n, 1);
  std::vector<std::uint32_t> perm(n);
  std::vector<int> node_of;
  const auto sample_size = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(hp.gbt_subsample * static_cast<double>(n))));

  for (int m = 0; m < hp.gbt_trees; ++m) {
    if (sample_size < n) {
      std::iota(perm.begin(), perm.end(), 0U);
      rng.shuffle(perm.begin(), perm.end());
      std::fill(in_sample.begin(), in_sample.end(), 0);
      for (std::size_t i = 0; i < sample_size; ++i) in_sample[perm[i]] = 1;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double r = data.targets[i] - fitted[i];
      if (loss == BoostLoss::kSquared) grad[i] = r;
      else grad[i] = r > 0.0 ? t : (r < 0.0 ? t - 1.0 : 0.0);
    }
    RegressionTree tree = grower.grow(grad, in_sample, node_of);

    std::vector<std::vector<double>> leaf_resid(tree.nodes.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (node_of[i] < 0) continue;
      leaf_resid[static_cast<std::size_t>(node_of[i])].push_back(data.targets[i] - fitted[i]);
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      auto& nd = tree.nodes[k];
      auto& r = leaf_resid[k];
      if (!nd.is_leaf() || r.empty()) continue;
      nd.value = loss == BoostLoss::kSquared
                     ? std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size())
                     : empirical_quantile(r, t);
    }
    for (std::size_t i = 0; i < n; ++i) {
      fitted[i] += model.learning_rate * tree.predict(data.row(i));
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace csr
