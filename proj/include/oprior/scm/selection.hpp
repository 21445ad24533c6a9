// SPDX-License-Identifier: Apache-2.0
//
// Diversity-aware choice of feature and target columns among all node
// outputs of a sampled DAG.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oprior/core/error.hpp"
#include "oprior/core/matrix.hpp"
#include "oprior/core/rng.hpp"
#include "oprior/core/stats.hpp"

namespace oprior::scm {

enum class SelectionStrategy : std::uint8_t { kmeans, farthest_point, knn_entropy, community };

inline std::string_view to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::kmeans: return "kmeans";
    case SelectionStrategy::farthest_point: return "farthest_point";
    case SelectionStrategy::knn_entropy: return "knn_entropy";
    case SelectionStrategy::community: return "community";
  }
  return "kmeans";
}

struct FeatureTargetSelection {
  SelectionStrategy strategy = SelectionStrategy::kmeans;
  std::vector<std::size_t> feature_columns;
  std::size_t target_column = 0;

  [[nodiscard]] bool resolved() const { return !feature_columns.empty(); }
  bool operator==(const FeatureTargetSelection&) const = default;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Columns restricted to `rows` and scaled to zero mean, unit sample std.
/// Constant columns map to the zero vector.
inline ColumnTable standardized_representations(const ColumnTable& cols, std::span<const std::size_t> rows) {
  ColumnTable out(cols.size(), Column(rows.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (std::size_t i = 0; i < rows.size(); ++i) out[c][i] = cols[c][rows[i]];
    const double m = stats::mean(out[c]);
    const double s = stats::stddev(out[c]);
    for (double& v : out[c]) v = s > 0.0 ? (v - m) / s : 0.0;
  }
  return out;
}

/// Greedy max-min order starting from `seed`.
inline std::vector<std::size_t> farthest_point_order(const ColumnTable& points, std::size_t seed, std::size_t count) {
  const std::size_t n = points.size();
  count = std::min(count, n);
  std::vector<std::size_t> chosen;
  if (count == 0) return chosen;
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  std::size_t cur = seed;
  for (;;) {
    chosen.push_back(cur);
    taken[cur] = 1;
    if (chosen.size() == count) break;
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      min_d[i] = std::min(min_d[i], squared_distance(points[i], points[cur]));
      if (min_d[i] > best_d) {
        best_d = min_d[i];
        best = i;
      }
    }
    cur = best;
  }
  return chosen;
}

struct KMeansResult {
  std::vector<std::size_t> assignment;
  ColumnTable centroids;
  std::size_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding, run to convergence.
inline KMeansResult kmeans(const ColumnTable& points, std::size_t k, RngStream& rng, std::size_t max_iter = 100) {
  const std::size_t n = points.size();
  k = std::min(k, n);
  KMeansResult res;
  if (n == 0 || k == 0) return res;
  const std::size_t dim = points[0].size();
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  res.centroids.push_back(points[rng.below(n)]);
  while (res.centroids.size() < k) {
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], res.centroids.back()));
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    const std::size_t next = total > 0.0 ? rng.categorical(d2) : rng.below(n);
    res.centroids.push_back(points[next]);
  }
  res.assignment.assign(n, 0);
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    bool changed = res.iterations == 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(points[i], res.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (best != res.assignment[i]) changed = true;
      res.assignment[i] = best;
    }
    if (!changed) break;
    std::vector<std::size_t> counts(k, 0);
    ColumnTable sums(k, Column(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = res.assignment[i];
      ++counts[c];
      for (std::size_t j = 0; j < dim; ++j) sums[c][j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t j = 0; j < dim; ++j) res.centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
  }
  return res;
}

/// `count` points, one per k-means cluster (the member nearest its centroid),
/// topped up by farthest-point selection when clusters come back empty.
inline std::vector<std::size_t> kmeans_select(const ColumnTable& points, std::size_t count, RngStream& rng) {
  const auto km = kmeans(points, count, rng);
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < km.centroids.size(); ++c) {
    std::size_t best = points.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (km.assignment[i] != c) continue;
      const double d = squared_distance(points[i], km.centroids[c]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    if (best < points.size()) chosen.push_back(best);
  }
  if (chosen.size() < count) {
    std::vector<char> taken(points.size(), 0);
    for (auto c : chosen) taken[c] = 1;
    while (chosen.size() < count && chosen.size() < points.size()) {
      std::size_t best = points.size();
      double best_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (taken[i]) continue;
        double m = std::numeric_limits<double>::infinity();
        for (auto c : chosen) m = std::min(m, squared_distance(points[i], points[c]));
        if (m > best_d) {
          best_d = m;
          best = i;
        }
      }
      taken[best] = 1;
      chosen.push_back(best);
    }
  }
  return chosen;
}

/// Kozachenko–Leonenko differential entropy estimate of a 1-D sample.
inline double knn_entropy(std::span<const double> sample, std::size_t k = 3) {
  const std::size_t n = sample.size();
  if (n <= k) return -std::numeric_limits<double>::infinity();
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  double sum_log = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t l = i;  // next candidate on the left is l - 1
    std::size_t r = i + 1;
    double eps = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double dl = l > 0 ? s[i] - s[l - 1] : std::numeric_limits<double>::infinity();
      const double dr = r < n ? s[r] - s[i] : std::numeric_limits<double>::infinity();
      if (dl <= dr) {
        eps = dl;
        --l;
      } else {
        eps = dr;
        ++r;
      }
    }
    sum_log += std::log(std::max(eps, 1e-12));
  }
  return stats::digamma(static_cast<double>(n)) - stats::digamma(static_cast<double>(k)) + std::log(2.0) +
         sum_log / static_cast<double>(n);
}

/// Symmetric k-nearest-neighbour graph; weight |cosine similarity|.
inline Matrix<double> knn_cosine_graph(const ColumnTable& points, std::size_t k) {
  const std::size_t n = points.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = std::sqrt(squared_distance(points[i], Column(points[i].size(), 0.0)));
  Matrix<double> sim(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double s = 0.0;
      if (norms[i] > 0.0 && norms[j] > 0.0) {
        for (std::size_t t = 0; t < points[i].size(); ++t) s += points[i][t] * points[j][t];
        s = std::fabs(s / (norms[i] * norms[j]));
      }
      sim(i, j) = sim(j, i) = s;
    }
  }
  Matrix<double> adj(n, n, 0.0);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(i));
    const std::size_t kk = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(),
                      [&](std::size_t a, std::size_t b) { return sim(i, a) > sim(i, b) || (sim(i, a) == sim(i, b) && a < b); });
    for (std::size_t t = 0; t < kk; ++t) {
      const std::size_t j = idx[t];
      const double w = std::max(sim(i, j), 1e-9);
      adj(i, j) = std::max(adj(i, j), w);
      adj(j, i) = adj(i, j);
    }
  }
  return adj;
}

/// Louvain community detection (local moving + aggregation) on a dense
/// symmetric weighted adjacency. Returns a community label per node, labels
/// renumbered to 0..C-1 in order of first appearance.
inline std::vector<std::size_t> louvain(const Matrix<double>& adjacency, double resolution, RngStream& rng) {
  const std::size_t n0 = adjacency.rows();
  std::vector<std::size_t> membership(n0);
  std::iota(membership.begin(), membership.end(), std::size_t{0});
  if (n0 == 0) return membership;
  Matrix<double> g = adjacency;
  double two_m = 0.0;
  for (double v : g.data()) two_m += v;
  if (two_m <= 0.0) return membership;

  for (int level = 0; level < 32; ++level) {
    const std::size_t n = g.rows();
    std::vector<double> k(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) k[i] += g(i, j);
    }
    std::vector<std::size_t> comm(n);
    std::iota(comm.begin(), comm.end(), std::size_t{0});
    std::vector<double> tot = k;
    bool any_move = false;
    std::vector<double> link(n, 0.0);
    for (int pass = 0; pass < 100; ++pass) {
      bool moved = false;
      for (std::size_t v : rng.permutation(n)) {
        const std::size_t own = comm[v];
        std::fill(link.begin(), link.end(), 0.0);
        for (std::size_t u = 0; u < n; ++u) {
          if (u != v && g(v, u) > 0.0) link[comm[u]] += g(v, u);
        }
        tot[own] -= k[v];
        std::size_t best = own;
        double best_gain = link[own] - resolution * tot[own] * k[v] / two_m;
        for (std::size_t c = 0; c < n; ++c) {
          if (link[c] <= 0.0 || c == own) continue;
          const double gain = link[c] - resolution * tot[c] * k[v] / two_m;
          if (gain > best_gain + 1e-12) {
            best_gain = gain;
            best = c;
          }
        }
        tot[best] += k[v];
        if (best != own) {
          comm[v] = best;
          moved = true;
          any_move = true;
        }
      }
      if (!moved) break;
    }
    if (!any_move) break;
    // Renumber and aggregate.
    std::vector<std::size_t> remap(n, n);
    std::size_t next_id = 0;
    for (std::size_t v = 0; v < n; ++v) {
      if (remap[comm[v]] == n) remap[comm[v]] = next_id++;
    }
    for (auto& m : membership) m = remap[comm[m]];
    Matrix<double> agg(next_id, next_id, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) agg(remap[comm[i]], remap[comm[j]]) += g(i, j);
    }
    g = std::move(agg);
    if (next_id == n) break;
  }
  std::vector<std::size_t> remap(n0, n0);
  std::size_t next_id = 0;
  for (auto& m : membership) {
    if (remap[m] == n0) remap[m] = next_id++;
    m = remap[m];
  }
  return membership;
}

/// One representative per community (highest weighted degree), then the
/// remaining members round-robin across communities by degree.
inline std::vector<std::size_t> community_select(const Matrix<double>& adjacency,
                                                 const std::vector<std::size_t>& labels, std::size_t count) {
  const std::size_t n = labels.size();
  std::size_t n_comm = 0;
  for (auto l : labels) n_comm = std::max(n_comm, l + 1);
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) degree[i] += adjacency(i, j);
  }
  std::vector<std::vector<std::size_t>> members(n_comm);
  for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);
  for (auto& m : members) {
    std::stable_sort(m.begin(), m.end(), [&](std::size_t a, std::size_t b) { return degree[a] > degree[b]; });
  }
  std::vector<std::size_t> order(n_comm);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return members[a].size() > members[b].size(); });
  std::vector<std::size_t> chosen;
  for (std::size_t round = 0; chosen.size() < count; ++round) {
    bool any = false;
    for (auto c : order) {
      if (round < members[c].size() && chosen.size() < count) {
        chosen.push_back(members[c][round]);
        any = true;
      }
    }
    if (!any) break;
  }
  return chosen;
}

/// Picks d feature columns and one target column from all node outputs.
/// `node_of_column[c]` is the DAG node producing column c; the chosen column
/// from the latest node becomes the target.
inline FeatureTargetSelection select_columns(const ColumnTable& node_outputs,
                                             std::span<const std::size_t> node_of_column, SelectionStrategy strategy,
                                             std::size_t d, RngStream& rng) {
  const std::size_t total = node_outputs.size();
  if (total <= d) {
    throw SelectionError("need more than " + std::to_string(d) + " candidate columns, have " + std::to_string(total));
  }
  const std::size_t rows = node_outputs.empty() ? 0 : node_outputs[0].size();
  const std::size_t want = d + 1;

  // Prefer non-constant columns when there are enough of them.
  std::vector<std::size_t> pool;
  for (std::size_t c = 0; c < total; ++c) {
    if (stats::stddev(node_outputs[c]) > 1e-8) pool.push_back(c);
  }
  if (pool.size() < want) {
    pool.resize(total);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
  }

  // Representations on at most 256 rows keep selection cost bounded.
  std::vector<std::size_t> rep_rows;
  if (rows <= 256) {
    rep_rows.resize(rows);
    std::iota(rep_rows.begin(), rep_rows.end(), std::size_t{0});
  } else {
    rep_rows = rng.sample_without_replacement(rows, 256);
    std::sort(rep_rows.begin(), rep_rows.end());
  }
  ColumnTable candidates;
  candidates.reserve(pool.size());
  for (auto c : pool) candidates.push_back(node_outputs[c]);

  std::vector<std::size_t> picked;  // indices into pool
  switch (strategy) {
    case SelectionStrategy::kmeans: {
      picked = kmeans_select(standardized_representations(candidates, rep_rows), want, rng);
      break;
    }
    case SelectionStrategy::farthest_point: {
      const auto reps = standardized_representations(candidates, rep_rows);
      picked = farthest_point_order(reps, rng.below(reps.size()), want);
      break;
    }
    case SelectionStrategy::knn_entropy: {
      std::vector<double> h(candidates.size());
      for (std::size_t i = 0; i < candidates.size(); ++i) h[i] = knn_entropy(candidates[i], 3);
      picked.resize(candidates.size());
      std::iota(picked.begin(), picked.end(), std::size_t{0});
      std::stable_sort(picked.begin(), picked.end(), [&](std::size_t a, std::size_t b) { return h[a] > h[b]; });
      picked.resize(want);
      break;
    }
    case SelectionStrategy::community: {
      const auto reps = standardized_representations(candidates, rep_rows);
      const auto adj = knn_cosine_graph(reps, 10);
      const auto labels = louvain(adj, 1.0, rng);
      picked = community_select(adj, labels, want);
      break;
    }
  }

  std::vector<std::size_t> cols;
  cols.reserve(want);
  for (auto i : picked) cols.push_back(pool[i]);

  // Target: chosen column from the deepest node, ties broken at random.
  std::size_t deepest = 0;
  for (auto c : cols) deepest = std::max(deepest, node_of_column.empty() ? 0 : node_of_column[c]);
  std::vector<std::size_t> target_candidates;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if ((node_of_column.empty() ? 0 : node_of_column[cols[i]]) == deepest) target_candidates.push_back(i);
  }
  const std::size_t ti = target_candidates[rng.below(target_candidates.size())];

  FeatureTargetSelection sel;
  sel.strategy = strategy;
  sel.target_column = cols[ti];
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i != ti) sel.feature_columns.push_back(cols[i]);
  }
  return sel;
}

}  // namespace oprior::scm
