// SPDX-License-Identifier: Apache-2.0
//
// Engineered columns: interactions, low-rank projections, noisy duplicates,
// random linear combinations.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "oprior/core/eigen.hpp"
#include "oprior/core/rng.hpp"
#include "oprior/core/stats.hpp"
#include "oprior/hyperprior.hpp"
#include "oprior/realism/table.hpp"

namespace oprior::realism {

enum class AugmentKind : std::uint8_t { interaction, projection, noisy_duplicate, linear_combination };

inline std::string_view to_string(AugmentKind k) {
  switch (k) {
    case AugmentKind::interaction: return "interaction";
    case AugmentKind::projection: return "projection";
    case AugmentKind::noisy_duplicate: return "noisy_duplicate";
    case AugmentKind::linear_combination: return "linear_combination";
  }
  return "interaction";
}

struct EngineeredColumn {
  AugmentKind kind = AugmentKind::interaction;
  std::vector<std::size_t> sources;
  std::vector<double> weights;  // combination weights or projection direction
  std::vector<double> center;   // projection: support means of sources
  double noise = 0.0;           // noisy duplicate: multiple of the source's support std
  double source_std = 0.0;
  bool operator==(const EngineeredColumn&) const = default;
};

struct AugmentPlan {
  std::vector<EngineeredColumn> columns;
  bool operator==(const AugmentPlan&) const = default;
};

/// Top-`rank` principal directions of the support rows of `sources`, found
/// with the symmetric eigensolver on the support covariance.
inline std::vector<EngineeredColumn> support_projections(const ColumnTable& x, std::size_t n,
                                                         const std::vector<std::size_t>& sources, std::size_t rank) {
  const std::size_t p = sources.size();
  std::vector<double> center(p);
  for (std::size_t a = 0; a < p; ++a) center[a] = stats::mean(support_of(x[sources[a]], n));
  Matrix<double> cov(p, p, 0.0);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      double s = 0.0;
      for (std::size_t t = 0; t < n; ++t) s += (x[sources[a]][t] - center[a]) * (x[sources[b]][t] - center[b]);
      cov(a, b) = s / static_cast<double>(n - 1);
      cov(b, a) = cov(a, b);
    }
  }
  const auto eig = linalg::symmetric_eigen(cov);
  std::vector<EngineeredColumn> out;
  for (std::size_t r = 0; r < std::min(rank, p); ++r) {
    EngineeredColumn c;
    c.kind = AugmentKind::projection;
    c.sources = sources;
    c.center = center;
    c.weights.resize(p);
    for (std::size_t a = 0; a < p; ++a) c.weights[a] = eig.vectors(a, r);
    out.push_back(std::move(c));
  }
  return out;
}

/// Appends between 1 and ceil(d/4) columns, never exceeding d_max in total.
inline AugmentPlan fit_augment(const WorkingTable& t, std::size_t d_max, RngStream& rng) {
  AugmentPlan plan;
  const std::size_t d = t.cols();
  const std::size_t n = t.support();
  if (d == 0 || d >= d_max) return plan;
  const std::size_t room = std::min(d_max - d, std::max<std::size_t>(1, (d + 3) / 4));
  const auto count = static_cast<std::size_t>(rng.integer(1, static_cast<std::int64_t>(room)));
  while (plan.columns.size() < count) {
    const auto kind = static_cast<AugmentKind>(rng.below(4));
    EngineeredColumn c;
    c.kind = kind;
    switch (kind) {
      case AugmentKind::interaction:
        c.sources = {static_cast<std::size_t>(rng.below(d)), static_cast<std::size_t>(rng.below(d))};
        break;
      case AugmentKind::projection: {
        const std::size_t p = std::min<std::size_t>(d, static_cast<std::size_t>(rng.integer(2, 8)));
        auto sources = rng.sample_without_replacement(d, p);
        std::sort(sources.begin(), sources.end());
        const std::size_t rank = std::min<std::size_t>(count - plan.columns.size(), rng.integer(1, 2));
        for (auto& proj : support_projections(t.x, n, sources, rank)) plan.columns.push_back(std::move(proj));
        continue;
      }
      case AugmentKind::noisy_duplicate:
        c.sources = {static_cast<std::size_t>(rng.below(d))};
        c.noise = rng.uniform(0.01, 0.3);
        c.source_std = stats::stddev(support_of(t.x[c.sources[0]], n));
        break;
      case AugmentKind::linear_combination: {
        const std::size_t k = std::min<std::size_t>(d, static_cast<std::size_t>(rng.integer(2, 4)));
        c.sources = rng.sample_without_replacement(d, k);
        for (std::size_t i = 0; i < k; ++i) c.weights.push_back(rng.normal());
        break;
      }
    }
    plan.columns.push_back(std::move(c));
  }
  return plan;
}

inline Column engineered_values(const EngineeredColumn& c, const ColumnTable& x, RngStream rng) {
  const std::size_t rows = x.empty() ? 0 : x[0].size();
  Column out(rows, 0.0);
  for (std::size_t t = 0; t < rows; ++t) {
    switch (c.kind) {
      case AugmentKind::interaction: out[t] = x[c.sources[0]][t] * x[c.sources[1]][t]; break;
      case AugmentKind::projection:
        for (std::size_t a = 0; a < c.sources.size(); ++a) out[t] += c.weights[a] * (x[c.sources[a]][t] - c.center[a]);
        break;
      case AugmentKind::noisy_duplicate:
        out[t] = x[c.sources[0]][t];
        if (c.noise > 0.0) out[t] += c.noise * c.source_std * rng.normal();
        break;
      case AugmentKind::linear_combination:
        for (std::size_t a = 0; a < c.sources.size(); ++a) out[t] += c.weights[a] * x[c.sources[a]][t];
        break;
    }
  }
  return out;
}

/// Engineered columns read only the pre-augmentation columns.
inline void apply_augment(const AugmentPlan& plan, WorkingTable& t, const RngStream& rng) {
  const ColumnTable base = t.x;
  for (std::size_t i = 0; i < plan.columns.size(); ++i) {
    ColumnMeta m;
    m.provenance = Provenance::engineered;
    t.append_column(engineered_values(plan.columns[i], base, rng.fork(i)), m);
  }
}

}  // namespace oprior::realism
