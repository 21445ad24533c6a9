// SPDX-License-Identifier: Apache-2.0
//
// Axis-aligned regression trees grown level by level. Every feature is
// argsorted once; each level then costs one pass over the rows per feature,
// independent of how many leaves are open.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "oprior/core/matrix.hpp"
#include "oprior/core/rng.hpp"

namespace oprior::tree {

enum class Splitter : std::uint8_t {
  exhaustive,  // CART best split
  random,      // Extra-Trees: one uniform threshold per candidate feature
  sampled,     // random partition with iid leaf values, target ignored
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  [[nodiscard]] double predict(const ColumnTable& x, std::size_t row) const {
    int id = 0;
    while (nodes[static_cast<std::size_t>(id)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(id)];
      id = x[static_cast<std::size_t>(nd.feature)][row] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(id)].value;
  }

  [[nodiscard]] std::vector<double> predict_all(const ColumnTable& x, std::size_t rows) const {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = predict(x, r);
    return out;
  }

  [[nodiscard]] std::size_t depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].feature >= 0) {
        d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        best = std::max(best, d[i] + 1);
      }
    }
    return best;
  }
};

struct TreeOptions {
  Splitter splitter = Splitter::exhaustive;
  std::size_t max_depth = 3;
  double min_leaf_weight = 1.0;
  /// Candidate features per leaf; 0 means all.
  std::size_t max_features = 0;
};

/// Row indices of each feature column in ascending value order.
inline std::vector<std::vector<std::uint32_t>> argsort_columns(const ColumnTable& x) {
  std::vector<std::vector<std::uint32_t>> orders(x.size());
  for (std::size_t f = 0; f < x.size(); ++f) {
    auto& o = orders[f];
    o.resize(x[f].size());
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x[f][a] < x[f][b]; });
  }
  return orders;
}

/// Threshold strictly between lo and hi such that lo <= t < hi.
inline double midpoint_threshold(double lo, double hi) {
  const double t = lo + 0.5 * (hi - lo);
  return t < hi ? t : lo;
}

/// Fits one tree to `target` with per-row `weights` (empty = all ones; zero
/// weight rows are left out of the fit but can still be predicted).
inline RegressionTree fit_tree(const ColumnTable& x, std::span<const double> target, std::span<const double> weights,
                               const std::vector<std::vector<std::uint32_t>>& orders, const TreeOptions& opt,
                               RngStream& rng) {
  const std::size_t rows = target.size();
  const std::size_t p = x.size();
  auto w_of = [&](std::size_t r) { return weights.empty() ? 1.0 : weights[r]; };

  RegressionTree tree;
  std::vector<int> node_of(rows, -1);
  double w_root = 0.0;
  double y_root = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (w_of(r) > 0.0) {
      node_of[r] = 0;
      w_root += w_of(r);
      y_root += w_of(r) * target[r];
    }
  }
  TreeNode root;
  root.value = opt.splitter == Splitter::sampled ? rng.normal() : (w_root > 0.0 ? y_root / w_root : 0.0);
  tree.nodes.push_back(root);
  if (p == 0 || w_root <= 0.0) return tree;

  std::vector<double> leaf_w{w_root};
  std::vector<double> leaf_y{y_root};
  std::vector<int> frontier{0};

  for (std::size_t depth = 0; depth < opt.max_depth && !frontier.empty(); ++depth) {
    const std::size_t n_nodes = tree.nodes.size();
    std::vector<char> open(n_nodes, 0);
    for (int id : frontier) open[static_cast<std::size_t>(id)] = 1;

    std::vector<double> best_score(n_nodes, -std::numeric_limits<double>::infinity());
    std::vector<int> best_feature(n_nodes, -1);
    std::vector<double> best_threshold(n_nodes, 0.0);

    // Candidate feature masks per open leaf.
    std::vector<std::vector<char>> allowed(n_nodes);
    const bool subsample = opt.max_features > 0 && opt.max_features < p;
    if (subsample) {
      for (int id : frontier) {
        auto& m = allowed[static_cast<std::size_t>(id)];
        m.assign(p, 0);
        for (auto f : rng.sample_without_replacement(p, opt.max_features)) m[f] = 1;
      }
    }
    auto is_allowed = [&](int id, std::size_t f) {
      return !subsample || allowed[static_cast<std::size_t>(id)][f] != 0;
    };

    if (opt.splitter == Splitter::sampled) {
      for (int id : frontier) {
        best_feature[static_cast<std::size_t>(id)] = static_cast<int>(rng.below(p));
      }
      // Leaf ranges along the chosen feature, threshold uniform inside.
      std::vector<double> lo(n_nodes, std::numeric_limits<double>::infinity());
      std::vector<double> hi(n_nodes, -std::numeric_limits<double>::infinity());
      for (std::size_t r = 0; r < rows; ++r) {
        const int id = node_of[r];
        if (id < 0 || !open[static_cast<std::size_t>(id)]) continue;
        const double v = x[static_cast<std::size_t>(best_feature[static_cast<std::size_t>(id)])][r];
        lo[static_cast<std::size_t>(id)] = std::min(lo[static_cast<std::size_t>(id)], v);
        hi[static_cast<std::size_t>(id)] = std::max(hi[static_cast<std::size_t>(id)], v);
      }
      for (int id : frontier) {
        const auto u = static_cast<std::size_t>(id);
        if (hi[u] > lo[u]) {
          best_threshold[u] = std::min(rng.uniform(lo[u], hi[u]), std::nextafter(hi[u], lo[u]));
          best_score[u] = 0.0;
        } else {
          best_feature[u] = -1;
        }
      }
    } else {
      std::vector<double> lw(n_nodes);
      std::vector<double> ly(n_nodes);
      std::vector<double> last(n_nodes);
      std::vector<char> seen(n_nodes);
      std::vector<double> thr(n_nodes);
      std::vector<double> lo(n_nodes);
      std::vector<double> hi(n_nodes);
      for (std::size_t f = 0; f < p; ++f) {
        const auto& col = x[f];
        const auto& order = orders[f];
        std::fill(lw.begin(), lw.end(), 0.0);
        std::fill(ly.begin(), ly.end(), 0.0);
        std::fill(seen.begin(), seen.end(), 0);
        if (opt.splitter == Splitter::random) {
          std::fill(lo.begin(), lo.end(), std::numeric_limits<double>::infinity());
          std::fill(hi.begin(), hi.end(), -std::numeric_limits<double>::infinity());
          for (std::size_t r = 0; r < rows; ++r) {
            const int id = node_of[r];
            if (id < 0 || !open[static_cast<std::size_t>(id)]) continue;
            lo[static_cast<std::size_t>(id)] = std::min(lo[static_cast<std::size_t>(id)], col[r]);
            hi[static_cast<std::size_t>(id)] = std::max(hi[static_cast<std::size_t>(id)], col[r]);
          }
          for (int id : frontier) {
            const auto u = static_cast<std::size_t>(id);
            const double draw = rng.uniform();
            thr[u] = hi[u] > lo[u] ? std::min(lo[u] + draw * (hi[u] - lo[u]), std::nextafter(hi[u], lo[u]))
                                   : std::numeric_limits<double>::quiet_NaN();
          }
          for (std::size_t r = 0; r < rows; ++r) {
            const int id = node_of[r];
            if (id < 0 || !open[static_cast<std::size_t>(id)]) continue;
            const auto u = static_cast<std::size_t>(id);
            if (col[r] <= thr[u]) {
              lw[u] += w_of(r);
              ly[u] += w_of(r) * target[r];
            }
          }
          for (int id : frontier) {
            const auto u = static_cast<std::size_t>(id);
            if (!is_allowed(id, f) || std::isnan(thr[u])) continue;
            const double rw = leaf_w[u] - lw[u];
            if (lw[u] < opt.min_leaf_weight || rw < opt.min_leaf_weight) continue;
            const double ry = leaf_y[u] - ly[u];
            const double score = ly[u] * ly[u] / lw[u] + ry * ry / rw;
            if (score > best_score[u]) {
              best_score[u] = score;
              best_feature[u] = static_cast<int>(f);
              best_threshold[u] = thr[u];
            }
          }
          continue;
        }
        for (const std::uint32_t r : order) {
          const int id = node_of[r];
          if (id < 0) continue;
          const auto u = static_cast<std::size_t>(id);
          if (!open[u] || !is_allowed(id, f)) continue;
          const double v = col[r];
          if (seen[u] && v > last[u]) {
            const double rw = leaf_w[u] - lw[u];
            if (lw[u] >= opt.min_leaf_weight && rw >= opt.min_leaf_weight) {
              const double ry = leaf_y[u] - ly[u];
              const double score = ly[u] * ly[u] / lw[u] + ry * ry / rw;
              if (score > best_score[u]) {
                best_score[u] = score;
                best_feature[u] = static_cast<int>(f);
                best_threshold[u] = midpoint_threshold(last[u], v);
              }
            }
          }
          lw[u] += w_of(r);
          ly[u] += w_of(r) * target[r];
          last[u] = v;
          seen[u] = 1;
        }
      }
    }

    // Split leaves whose best partition improves on the parent.
    std::vector<int> next;
    std::vector<int> left_of(n_nodes, -1);
    for (int id : frontier) {
      const auto u = static_cast<std::size_t>(id);
      if (best_feature[u] < 0) continue;
      if (opt.splitter != Splitter::sampled) {
        const double parent = leaf_y[u] * leaf_y[u] / leaf_w[u];
        if (!(best_score[u] > parent + 1e-12 * (1.0 + std::fabs(parent)))) continue;
      }
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      leaf_w.push_back(0.0);
      leaf_w.push_back(0.0);
      leaf_y.push_back(0.0);
      leaf_y.push_back(0.0);
      auto& nd = tree.nodes[u];
      nd.feature = best_feature[u];
      nd.threshold = best_threshold[u];
      nd.left = l;
      nd.right = l + 1;
      left_of[u] = l;
      next.push_back(l);
      next.push_back(l + 1);
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const int id = node_of[r];
      if (id < 0) continue;
      const int l = left_of[static_cast<std::size_t>(id)];
      if (l < 0) continue;
      const auto& nd = tree.nodes[static_cast<std::size_t>(id)];
      const int child = x[static_cast<std::size_t>(nd.feature)][r] <= nd.threshold ? l : l + 1;
      node_of[r] = child;
      leaf_w[static_cast<std::size_t>(child)] += w_of(r);
      leaf_y[static_cast<std::size_t>(child)] += w_of(r) * target[r];
    }
    for (int id : next) {
      const auto u = static_cast<std::size_t>(id);
      tree.nodes[u].value = opt.splitter == Splitter::sampled ? rng.normal()
                            : leaf_w[u] > 0.0                ? leaf_y[u] / leaf_w[u]
                                                              : 0.0;
    }
    frontier = std::move(next);
  }
  return tree;
}

/// Multinomial bootstrap counts over `rows` rows.
inline std::vector<double> bootstrap_weights(std::size_t rows, RngStream& rng) {
  std::vector<double> w(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) w[rng.below(rows)] += 1.0;
  return w;
}

}  // namespace oprior::tree
