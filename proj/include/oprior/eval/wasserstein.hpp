// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "oprior/core/error.hpp"
#include "oprior/core/rng.hpp"
#include "oprior/core/stats.hpp"

namespace oprior::eval {

/// Exact first Wasserstein distance between two empirical distributions:
/// the L1 distance between their quantile functions. Breakpoints i/m and
/// j/k are merged in integer units of 1/(m k), so unequal sizes are exact.
inline double wasserstein1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw EvalError("wasserstein1 needs two non-empty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  for (double v : x) {
    if (!std::isfinite(v)) throw EvalError("wasserstein1 sample is not finite");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw EvalError("wasserstein1 sample is not finite");
  }
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const auto m = static_cast<std::uint64_t>(x.size());
  const auto k = static_cast<std::uint64_t>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  std::uint64_t left_x = k;  // units remaining in x[i]
  std::uint64_t left_y = m;
  double total = 0.0;
  while (i < x.size() && j < y.size()) {
    const std::uint64_t step = std::min(left_x, left_y);
    total += std::fabs(x[i] - y[j]) * static_cast<double>(step);
    left_x -= step;
    left_y -= step;
    if (left_x == 0) {
      ++i;
      left_x = k;
    }
    if (left_y == 0) {
      ++j;
      left_y = m;
    }
  }
  return total / (static_cast<double>(m) * static_cast<double>(k));
}

/// Average-rank normalization to (0, 1): value -> (rank - 0.5) / count.
inline std::vector<double> rank_normalize(std::span<const double> x) {
  auto r = stats::average_ranks(x);
  const double n = static_cast<double>(x.size());
  for (double& v : r) v = (v - 0.5) / n;
  return r;
}

/// Uniform reservoir sample of at most `cap` values (Algorithm R). Pools
/// no larger than the cap come back unchanged.
class Reservoir {
 public:
  Reservoir(std::size_t cap, RngStream rng) : cap_(cap), rng_(rng) {}

  void add(double v) {
    ++seen_;
    if (items_.size() < cap_) {
      items_.push_back(v);
      return;
    }
    const auto j = rng_.below(seen_);
    if (j < cap_) items_[j] = v;
  }
  [[nodiscard]] const std::vector<double>& items() const { return items_; }
  [[nodiscard]] std::uint64_t seen() const { return seen_; }

 private:
  std::size_t cap_;
  RngStream rng_;
  std::vector<double> items_;
  std::uint64_t seen_ = 0;
};

}  // namespace oprior::eval
