// SPDX-License-Identifier: Apache-2.0
//
// Structured missingness (MCAR, MAR, MNAR) and imputation.
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
#include "oprior/realism/preprocess.hpp"
#include "oprior/realism/table.hpp"

namespace oprior::realism {

enum class MissingMechanism : std::uint8_t { mcar, mar, mnar };

inline std::string_view to_string(MissingMechanism m) {
  switch (m) {
    case MissingMechanism::mcar: return "mcar";
    case MissingMechanism::mar: return "mar";
    case MissingMechanism::mnar: return "mnar";
  }
  return "mcar";
}

inline MissingMechanism parse_missing_mechanism(std::string_view s) {
  for (auto m : {MissingMechanism::mcar, MissingMechanism::mar, MissingMechanism::mnar}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown missingness mechanism '" + std::string(s) + "'");
}

inline constexpr double kMaxMissingRate = 0.95;
inline constexpr double kInterceptBound = 30.0;

/// Intercept b with mean_t sigmoid(scores_t + b) = pi, by bisection on
/// [-30, 30]. Stops once the achieved rate is within 1e-10 of pi.
inline double calibrate_intercept(std::span<const double> scores, double pi) {
  if (!(pi > 0.0) || pi > kMaxMissingRate || scores.empty()) {
    throw CalibrationError("target rate outside (0, 0.95]");
  }
  auto rate = [&](double b) {
    double s = 0.0;
    for (double v : scores) s += stats::sigmoid(v + b);
    return s / static_cast<double>(scores.size());
  };
  double lo = -kInterceptBound;
  double hi = kInterceptBound;
  if (rate(lo) > pi + 1e-4 || rate(hi) < pi - 1e-4) throw CalibrationError("target rate unreachable");
  double mid = 0.0;
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double r = rate(mid);
    if (std::fabs(r - pi) < 1e-10) break;
    (r < pi ? lo : hi) = mid;
  }
  return mid;
}

struct ColumnMissingness {
  std::size_t column = 0;
  MissingMechanism mechanism = MissingMechanism::mcar;
  double rate = 0.0;
  double slope = 0.0;
  std::size_t driver = 0;  // MAR only
  int sign = 1;            // MNAR only
  double intercept = 0.0;
  double z_mean = 0.0;     // moments standardizing the score column
  double z_std = 1.0;
  // Filled after the mask is drawn, from observed support cells.
  double fill_mean = 0.0;
  double fill_median = 0.0;
  double fill_std = 0.0;
  std::size_t observed_support = 0;
  bool operator==(const ColumnMissingness&) const = default;
};

struct MissingnessPlan {
  Imputation imputation = Imputation::mean;
  std::vector<ColumnMissingness> columns;  // only columns with a positive rate
  bool operator==(const MissingnessPlan&) const = default;
};

inline double missingness_score(const ColumnMissingness& c, const WorkingTable& t, std::size_t row) {
  switch (c.mechanism) {
    case MissingMechanism::mcar: return 0.0;
    case MissingMechanism::mar: return c.slope * (t.x[c.driver][row] - c.z_mean) / c.z_std;
    case MissingMechanism::mnar: return c.slope * c.sign * (t.x[c.column][row] - c.z_mean) / c.z_std;
  }
  return 0.0;
}

/// Fully specified column plan; calibrates the intercept on support rows.
/// A MAR column in a one-column table falls back to MCAR.
inline ColumnMissingness plan_column(const WorkingTable& t, std::size_t j, MissingMechanism mech, double rate,
                                     double slope, std::size_t driver) {
  ColumnMissingness c;
  c.column = j;
  c.mechanism = mech;
  c.rate = std::clamp(rate, 0.0, kMaxMissingRate);
  c.slope = slope;
  if (mech == MissingMechanism::mar && (driver == j || driver >= t.cols())) c.mechanism = MissingMechanism::mcar;
  if (c.mechanism == MissingMechanism::mcar) {
    c.slope = 0.0;
    return c;
  }
  const std::size_t n = t.support();
  const std::size_t src = c.mechanism == MissingMechanism::mar ? driver : j;
  if (c.mechanism == MissingMechanism::mar) c.driver = driver;
  const auto support = support_of(t.x[src], n);
  c.z_mean = stats::mean(support);
  c.z_std = std::max(stats::stddev(support), kSigmaFloor);
  if (c.mechanism == MissingMechanism::mnar) c.sign = stats::skewness(support) >= 0.0 ? 1 : -1;
  if (c.rate > 0.0) {
    std::vector<double> scores(n);
    c.intercept = 0.0;
    for (std::size_t r = 0; r < n; ++r) scores[r] = missingness_score(c, t, r);
    c.intercept = calibrate_intercept(scores, c.rate);
  }
  return c;
}

/// Per-column rate min(0.95, pi * U[0.5, 1.5]); each column is active with
/// probability 0.7. Unreachable calibrations fall back to MCAR.
inline MissingnessPlan fit_missingness(const WorkingTable& t, const OmegaDraw& w, RngStream& rng) {
  MissingnessPlan plan;
  plan.imputation = parse_enum<Imputation>(w.choice(param::imputation));
  const double pi = w.value(param::missing_rate);
  const auto& mechanisms = w.support(param::missing_mechanism);
  const auto beta = w.ranges.at(std::string(param::missing_beta));
  for (std::size_t j = 0; j < t.cols(); ++j) {
    const bool active = rng.bernoulli(0.7);
    const double rate = std::min(kMaxMissingRate, pi * rng.uniform(0.5, 1.5));
    const auto mech = parse_missing_mechanism(draw_choice(mechanisms, rng));
    const double slope = rng.uniform(beta.lo, beta.hi);
    const std::size_t driver = t.cols() > 1 ? (j + 1 + rng.below(t.cols() - 1)) % t.cols() : j;
    if (!active || rate <= 0.0 || t.meta[j].semantic_type == SemanticType::categorical_subgroup) continue;
    try {
      plan.columns.push_back(plan_column(t, j, mech, rate, slope, driver));
    } catch (const CalibrationError&) {
      plan.columns.push_back(plan_column(t, j, MissingMechanism::mcar, rate, 0.0, j));
    }
  }
  return plan;
}

/// Rounds and clamps an imputed value into the column's semantic range.
inline double conform(double v, const ColumnMeta& m) {
  switch (m.semantic_type) {
    case SemanticType::count: return std::max(0.0, std::round(v));
    case SemanticType::ordinal:
      return std::clamp(std::round(v), 0.0, static_cast<double>(m.levels > 0 ? m.levels - 1 : 0));
    case SemanticType::bounded: return std::clamp(v, 1e-6, 1.0 - 1e-6);
    default: return v;
  }
}

/// Draws masks row by row, then fits fill statistics on observed support
/// cells and imputes every masked cell. Returns the plan with fill fields set.
inline MissingnessPlan apply_missingness(MissingnessPlan plan, WorkingTable& t, const RngStream& rng) {
  const std::size_t n = t.support();
  for (auto& c : plan.columns) {
    RngStream mask_rng = rng.fork(2 * c.column);
    RngStream fill_rng = rng.fork(2 * c.column + 1);
    auto& mask = t.mask[c.column];
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const double u = mask_rng.uniform();
      const double p = c.mechanism == MissingMechanism::mcar ? c.rate
                                                              : stats::sigmoid(missingness_score(c, t, r) + c.intercept);
      if (c.rate > 0.0 && u < p) mask[r] = 1;
    }
    auto& col = t.x[c.column];
    std::vector<double> observed;
    for (std::size_t r = 0; r < std::min(n, col.size()); ++r) {
      if (!mask[r]) observed.push_back(col[r]);
    }
    c.observed_support = observed.size();
    if (!observed.empty()) {
      c.fill_mean = stats::mean(observed);
      c.fill_median = stats::median(observed);
      c.fill_std = observed.size() > 1 ? stats::stddev(observed) : 0.0;
    }
    auto& meta = t.meta[c.column];
    meta.imputation = plan.imputation;
    for (std::size_t r = 0; r < col.size(); ++r) {
      if (!mask[r]) continue;
      double v = 0.0;
      switch (plan.imputation) {
        case Imputation::none:
        case Imputation::mean: v = c.fill_mean; break;
        case Imputation::median: v = c.fill_median; break;
        case Imputation::constant: v = 0.0; break;
        case Imputation::sampled:
          v = observed.empty() ? 0.0 : observed[fill_rng.below(observed.size())];
          break;
        case Imputation::gaussian: v = c.fill_mean + 0.1 * c.fill_std * fill_rng.normal(); break;
      }
      col[r] = conform(v, meta);
    }
  }
  return plan;
}

}  // namespace oprior::realism
