// SPDX-License-Identifier: Apache-2.0
//
// Per-column marginal morphs. Parameters come from support rows; each
// cell's output depends on those parameters, its own input and its own noise.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "oprior/core/rng.hpp"
#include "oprior/core/stats.hpp"
#include "oprior/hyperprior.hpp"
#include "oprior/realism/preprocess.hpp"
#include "oprior/realism/table.hpp"

namespace oprior::realism {

enum class MorphKind : std::uint8_t {
  heavy_tail,
  bounded,
  count,
  ordinal_bins,
  kumaraswamy_warp,
  rank_gauss,
  heteroscedastic_noise,
  redundant_copy,
  sparse_outliers,
};
inline constexpr std::size_t kMorphKindCount = 9;

inline std::string_view to_string(MorphKind k) {
  switch (k) {
    case MorphKind::heavy_tail: return "heavy_tail";
    case MorphKind::bounded: return "bounded";
    case MorphKind::count: return "count";
    case MorphKind::ordinal_bins: return "ordinal_bins";
    case MorphKind::kumaraswamy_warp: return "kumaraswamy_warp";
    case MorphKind::rank_gauss: return "rank_gauss";
    case MorphKind::heteroscedastic_noise: return "heteroscedastic_noise";
    case MorphKind::redundant_copy: return "redundant_copy";
    case MorphKind::sparse_outliers: return "sparse_outliers";
  }
  return "heavy_tail";
}

inline constexpr double kBoundedEps = 1e-6;
inline constexpr double kCountRateCap = 1e7;

struct MorphSpec {
  std::size_t column = 0;
  MorphKind kind = MorphKind::heavy_tail;
  double mean = 0.0;  // support moments used for z
  double std = 1.0;
  int variant = 0;
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
  std::vector<double> edges;  // ordinal bin edges, increasing
  stats::InterpolatedEcdf ecdf;
  std::size_t source = 0;     // redundant copy
  double source_std = 1.0;
  bool operator==(const MorphSpec&) const = default;
};

struct MorphPlan {
  std::vector<MorphSpec> specs;
  bool operator==(const MorphPlan&) const = default;
};

/// Uniform-width (variant 0) or equal-mass (variant 1) bin edges from support.
inline std::vector<double> ordinal_edges(std::span<const double> support, std::size_t levels, int variant) {
  std::vector<double> s(support.begin(), support.end());
  std::sort(s.begin(), s.end());
  std::vector<double> edges;
  for (std::size_t i = 1; i < levels; ++i) {
    const double q = static_cast<double>(i) / static_cast<double>(levels);
    edges.push_back(variant == 0 ? s.front() + q * (s.back() - s.front()) : stats::quantile_sorted(s, q));
  }
  return edges;
}

/// Number of edges at or below x: values equal to an edge go to the upper level.
inline double ordinal_level(const std::vector<double>& edges, double x) {
  return static_cast<double>(std::upper_bound(edges.begin(), edges.end(), x) - edges.begin());
}

inline MorphSpec fit_morph_column(const WorkingTable& t, std::size_t j, MorphKind kind, const OmegaDraw& w,
                                  RngStream& rng) {
  const auto support = support_of(t.x[j], t.support());
  MorphSpec s;
  s.column = j;
  s.kind = kind;
  s.mean = stats::mean(support);
  s.std = std::max(stats::stddev(support), kSigmaFloor);
  switch (kind) {
    case MorphKind::heavy_tail: {
      const double severity = w.value(param::tail_severity);
      s.variant = static_cast<int>(rng.below(2));
      s.a = 2.5 + 27.5 * (1.0 - severity);  // Student-t degrees of freedom
      s.b = 0.05 + 0.45 * severity;         // generalized Pareto shape
      break;
    }
    case MorphKind::bounded:
      s.variant = static_cast<int>(rng.below(2));
      if (s.variant == 0) {
        s.a = rng.uniform(0.5, 2.0);
        s.c = rng.uniform(-1.0, 1.0);
      } else {
        s.a = rng.uniform(0.5, 3.0);
        s.b = rng.uniform(0.5, 3.0);
      }
      break;
    case MorphKind::count:
      s.variant = static_cast<int>(rng.below(2));
      s.a = rng.uniform(0.2, 1.0);   // log-rate slope
      s.b = rng.uniform(0.5, 20.0);  // base rate
      s.c = rng.uniform(0.5, 5.0);   // negative-binomial dispersion
      break;
    case MorphKind::ordinal_bins: {
      s.variant = static_cast<int>(rng.below(2));
      const auto levels = static_cast<std::size_t>(rng.integer(3, 10));
      s.edges = ordinal_edges(support, levels, s.variant);
      break;
    }
    case MorphKind::kumaraswamy_warp:
      s.a = rng.uniform(0.3, 3.0);
      s.b = rng.uniform(0.3, 3.0);
      break;
    case MorphKind::rank_gauss: s.ecdf = stats::InterpolatedEcdf(support); break;
    case MorphKind::heteroscedastic_noise: s.a = w.value(param::hetero_alpha); break;
    case MorphKind::redundant_copy: {
      const std::size_t d = t.cols();
      s.source = d > 1 ? (j + 1 + rng.below(d - 1)) % d : j;
      s.a = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.5, 2.0);
      s.source_std = std::max(stats::stddev(support_of(t.x[s.source], t.support())), kSigmaFloor);
      s.b = rng.uniform(-1.0, 1.0) * s.source_std;
      s.c = rng.uniform(0.01, 0.2);
      break;
    }
    case MorphKind::sparse_outliers: s.a = rng.uniform(0.001, 0.02); break;
  }
  return s;
}

/// Each column is selected with probability morph_probability and gets one
/// uniformly chosen morph kind. Subgroup columns are never morphed.
inline MorphPlan fit_morph(const WorkingTable& t, const OmegaDraw& w, RngStream& rng) {
  MorphPlan plan;
  const double p = w.value(param::morph_probability);
  for (std::size_t j = 0; j < t.cols(); ++j) {
    const double u = rng.uniform();
    const auto kind = static_cast<MorphKind>(rng.below(kMorphKindCount));
    RngStream col_rng = rng.fork(j);
    if (u >= p || t.meta[j].semantic_type != SemanticType::continuous) continue;
    plan.specs.push_back(fit_morph_column(t, j, kind, w, col_rng));
  }
  return plan;
}

inline double morph_cell(const MorphSpec& s, double x, double source_x, RngStream& rng) {
  const double z = (x - s.mean) / s.std;
  switch (s.kind) {
    case MorphKind::heavy_tail:
      if (s.variant == 0) return s.mean + s.std * z * std::sqrt(s.a / rng.chi_squared(s.a));
      {
        const double u = std::min(2.0 * stats::normal_cdf(std::fabs(z)) - 1.0, 1.0 - 1e-12);
        const double g = (std::pow(1.0 - u, -s.b) - 1.0) / s.b;
        return s.mean + s.std * std::copysign(g, z);
      }
    case MorphKind::bounded: {
      double v = 0.0;
      if (s.variant == 0) {
        v = stats::sigmoid(s.a * z + s.c);
      } else {
        const double u = stats::normal_cdf(z);
        v = std::pow(1.0 - std::pow(1.0 - u, 1.0 / s.b), 1.0 / s.a);
      }
      return std::clamp(v, kBoundedEps, 1.0 - kBoundedEps);
    }
    case MorphKind::count: {
      const double lambda = std::min(s.b * std::exp(s.a * std::clamp(z, -10.0, 10.0)), kCountRateCap);
      const auto k = s.variant == 0 ? rng.poisson(lambda) : rng.negative_binomial(lambda, s.c);
      return static_cast<double>(k);
    }
    case MorphKind::ordinal_bins: return ordinal_level(s.edges, x);
    case MorphKind::kumaraswamy_warp: {
      const double u = stats::normal_cdf(z);
      const double v = std::clamp(1.0 - std::pow(1.0 - std::pow(u, s.a), s.b), 1e-12, 1.0 - 1e-12);
      return s.mean + s.std * stats::normal_quantile(v);
    }
    case MorphKind::rank_gauss: return stats::normal_quantile(s.ecdf(x));
    case MorphKind::heteroscedastic_noise:
      return x + s.std * std::exp(s.a * std::min(std::fabs(z), 50.0)) * rng.normal();
    case MorphKind::redundant_copy: return s.a * source_x + s.b + s.c * s.source_std * rng.normal();
    case MorphKind::sparse_outliers: {
      const double u = rng.uniform();
      const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
      const double mag = rng.uniform(5.0, 20.0);
      return u < s.a ? s.mean + sign * s.std * mag : x;
    }
  }
  return x;
}

inline void update_meta(const MorphSpec& s, ColumnMeta& m) {
  switch (s.kind) {
    case MorphKind::bounded: m.semantic_type = SemanticType::bounded; break;
    case MorphKind::count: m.semantic_type = SemanticType::count; break;
    case MorphKind::ordinal_bins:
      m.semantic_type = SemanticType::ordinal;
      m.levels = s.edges.size() + 1;
      break;
    default: break;
  }
}

/// Morphs read the pre-morph table, so redundant copies see unmorphed sources.
inline void apply_morph(const MorphPlan& plan, WorkingTable& t, const RngStream& rng) {
  const ColumnTable base = t.x;
  for (const auto& s : plan.specs) {
    RngStream col_rng = rng.fork(s.column);
    for (std::size_t r = 0; r < t.rows(); ++r) {
      t.x[s.column][r] = morph_cell(s, base[s.column][r], base[s.source][r], col_rng);
    }
    update_meta(s, t.meta[s.column]);
  }
}

}  // namespace oprior::realism
