// SPDX-License-Identifier: Apache-2.0
//
// Support-only clipping and monotone maps.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

#include "oprior/core/error.hpp"
#include "oprior/core/rng.hpp"
#include "oprior/core/stats.hpp"
#include "oprior/hyperprior.hpp"
#include "oprior/realism/table.hpp"

namespace oprior::realism {

inline constexpr double kSigmaFloor = 0.01;

enum class MonotoneMap : std::uint8_t { none, standardize, power, log_shift, rank_gauss, quantile };

inline std::string_view to_string(MonotoneMap m) {
  switch (m) {
    case MonotoneMap::none: return "none";
    case MonotoneMap::standardize: return "standardize";
    case MonotoneMap::power: return "power";
    case MonotoneMap::log_shift: return "log_shift";
    case MonotoneMap::rank_gauss: return "rank_gauss";
    case MonotoneMap::quantile: return "quantile";
  }
  return "none";
}

inline MonotoneMap parse_monotone_map(std::string_view s) {
  for (auto m : {MonotoneMap::none, MonotoneMap::standardize, MonotoneMap::power, MonotoneMap::log_shift,
                 MonotoneMap::rank_gauss, MonotoneMap::quantile}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown preprocess map '" + std::string(s) + "'");
}

struct ColumnPreprocessor {
  double mean = 0.0;
  double std = 1.0;  // floored
  double lower = 0.0;
  double upper = 0.0;
  MonotoneMap map = MonotoneMap::none;
  stats::InterpolatedEcdf ecdf;  // rank_gauss / quantile, fitted on clipped support

  bool operator==(const ColumnPreprocessor&) const = default;
};

struct Preprocessor {
  double kappa = 4.0;
  std::vector<ColumnPreprocessor> columns;
  bool operator==(const Preprocessor&) const = default;
};

/// Fits one column from its first n rows. An infinite kappa disables clipping.
inline ColumnPreprocessor fit_column(std::span<const double> column, std::size_t n, double kappa, MonotoneMap map) {
  if (n < 2) throw ConfigError("preprocessor needs at least two support rows");
  const auto support = column.first(n);
  ColumnPreprocessor c;
  c.mean = stats::mean(support);
  c.std = std::max(stats::stddev(support), kSigmaFloor);
  c.lower = c.mean - kappa * c.std;
  c.upper = c.mean + kappa * c.std;
  c.map = map;
  if (map == MonotoneMap::rank_gauss || map == MonotoneMap::quantile) {
    std::vector<double> clipped(support.begin(), support.end());
    for (double& v : clipped) v = std::clamp(v, c.lower, c.upper);
    c.ecdf = stats::InterpolatedEcdf(clipped);
  }
  return c;
}

inline double apply_column(const ColumnPreprocessor& c, double x) {
  const double v = std::clamp(x, c.lower, c.upper);
  switch (c.map) {
    case MonotoneMap::none: return v;
    case MonotoneMap::standardize: return (v - c.mean) / c.std;
    case MonotoneMap::power: {
      const double d = v - c.mean;
      return std::copysign(std::log1p(std::fabs(d) / c.std), d);
    }
    case MonotoneMap::log_shift: return std::log(v - c.lower + c.std);
    case MonotoneMap::rank_gauss: return stats::normal_quantile(c.ecdf(v));
    case MonotoneMap::quantile: return c.ecdf(v);
  }
  return v;
}

/// Map choice per column is drawn from the episode's preprocess_map support.
inline Preprocessor fit_preprocessor(const WorkingTable& t, const OmegaDraw& w, RngStream& rng) {
  Preprocessor p;
  p.kappa = w.value(param::kappa);
  const auto& support = w.support(param::preprocess_map);
  for (const auto& col : t.x) {
    const auto map = parse_monotone_map(draw_choice(support, rng));
    p.columns.push_back(fit_column(col, t.support(), p.kappa, map));
  }
  return p;
}

/// Mandatory normalization used when realism is disabled: standardize, no clipping.
inline Preprocessor standardizing_preprocessor(const WorkingTable& t) {
  Preprocessor p;
  p.kappa = std::numeric_limits<double>::infinity();
  for (const auto& col : t.x) {
    p.columns.push_back(fit_column(col, t.support(), p.kappa, MonotoneMap::standardize));
  }
  return p;
}

inline void apply_preprocessor(const Preprocessor& p, WorkingTable& t) {
  for (std::size_t j = 0; j < t.cols(); ++j) {
    for (double& v : t.x[j]) v = apply_column(p.columns[j], v);
  }
}

}  // namespace oprior::realism
