// SPDX-License-Identifier: Apache-2.0
//
// Slow, independent reference implementations used only by tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace oprior::oracle {

/// W1 between two empirical measures as a transportation problem, solved by
/// successive shortest paths on the bipartite network. Point i of `a` ships
/// |b| units, point j of `b` receives |a| units; cost is |a_i - b_j|.
inline double transport_w1(std::span<const double> a, std::span<const double> b) {
  const std::size_t m = a.size(), k = b.size();
  const std::size_t source = m + k, sink = m + k + 1, nodes = m + k + 2;
  struct Edge {
    std::size_t to;
    std::int64_t cap;
    double cost;
  };
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> adj(nodes);
  auto add = [&](std::size_t u, std::size_t v, std::int64_t cap, double cost) {
    adj[u].push_back(edges.size());
    edges.push_back({v, cap, cost});
    adj[v].push_back(edges.size());
    edges.push_back({u, 0, -cost});
  };
  for (std::size_t i = 0; i < m; ++i) add(source, i, static_cast<std::int64_t>(k), 0.0);
  for (std::size_t j = 0; j < k; ++j) add(m + j, sink, static_cast<std::int64_t>(m), 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) add(i, m + j, static_cast<std::int64_t>(m * k), std::fabs(a[i] - b[j]));

  const auto need = static_cast<std::int64_t>(m * k);
  std::int64_t flow = 0;
  double cost = 0.0;
  while (flow < need) {
    // Bellman-Ford: residual graph carries negative reverse costs. A
    // relaxation must gain more than kSlack, so rounding-level cycles in the
    // costs can never enter the predecessor graph.
    constexpr double kSlack = 1e-13;
    std::vector<double> dist(nodes, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> via(nodes, SIZE_MAX);
    dist[source] = 0.0;
    for (std::size_t round = 0; round + 1 < nodes; ++round) {
      bool changed = false;
      for (std::size_t u = 0; u < nodes; ++u) {
        if (!std::isfinite(dist[u])) continue;
        for (auto e : adj[u]) {
          if (edges[e].cap > 0 && dist[u] + edges[e].cost < dist[edges[e].to] - kSlack) {
            dist[edges[e].to] = dist[u] + edges[e].cost;
            via[edges[e].to] = e;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (!std::isfinite(dist[sink])) break;
    std::int64_t push = need - flow;
    std::size_t hops = 0;
    for (std::size_t v = sink; v != source; v = edges[via[v] ^ 1].to) {
      if (via[v] == SIZE_MAX || ++hops > nodes) return std::numeric_limits<double>::quiet_NaN();
      push = std::min(push, edges[via[v]].cap);
    }
    for (std::size_t v = sink; v != source; v = edges[via[v] ^ 1].to) {
      edges[via[v]].cap -= push;
      edges[via[v] ^ 1].cap += push;
    }
    flow += push;
    cost += static_cast<double>(push) * dist[sink];
  }
  return cost / static_cast<double>(m * k);
}

/// W1 as the integral of |F_a - F_b| over the merged support.
inline double cdf_w1(std::span<const double> a, std::span<const double> b) {
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end()), all;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  all.insert(all.end(), x.begin(), x.end());
  all.insert(all.end(), y.begin(), y.end());
  std::sort(all.begin(), all.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    const double t = all[i];
    const double fa = static_cast<double>(std::upper_bound(x.begin(), x.end(), t) - x.begin()) / x.size();
    const double fb = static_cast<double>(std::upper_bound(y.begin(), y.end(), t) - y.begin()) / y.size();
    total += std::fabs(fa - fb) * (all[i + 1] - t);
  }
  return total;
}

}  // namespace oprior::oracle
