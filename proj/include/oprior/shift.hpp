// SPDX-License-Identifier: Apache-2.0
//
// Support/query mismatch: latent confounding, spurious support predictors,
// covariate shift, seasonal and regime drift.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string_view>
#include <vector>

#include "oprior/core/rng.hpp"
#include "oprior/core/stats.hpp"
#include "oprior/hyperprior.hpp"
#include "oprior/realism/preprocess.hpp"
#include "oprior/realism/table.hpp"

namespace oprior::shift {

using realism::kSigmaFloor;

struct ConfoundingPlan {
  Column z;  // support mean 0, support variance 1
  double alpha_x = 0.0;
  double alpha_y = 0.0;
  std::vector<std::size_t> columns;
  bool operator==(const ConfoundingPlan&) const = default;
};

struct SpuriousColumn {
  std::size_t column = 0;
  double lambda = 0.0;
  double rho = 1.0;
  int sign = 1;
  double noise_scale = 1.0;
  bool operator==(const SpuriousColumn&) const = default;
};

struct SpuriousPlan {
  double y_mean = 0.0;  // support moments defining the normalized target
  double y_scale = 1.0;
  std::vector<SpuriousColumn> columns;
  bool operator==(const SpuriousPlan&) const = default;
};

struct CovariateShiftColumn {
  std::size_t column = 0;
  double a = 1.0;
  double b = 0.0;
  bool operator==(const CovariateShiftColumn&) const = default;
};

struct SeasonalPlan {
  double amplitude = 0.0;
  double frequency = 0.0;
  double phase = 0.0;
  bool operator==(const SeasonalPlan&) const = default;
};

enum class Blend : std::uint8_t { sigmoid, abrupt };

inline std::string_view to_string(Blend b) { return b == Blend::sigmoid ? "sigmoid" : "abrupt"; }

struct Affine {
  double a = 1.0;
  double b = 0.0;
  bool operator==(const Affine&) const = default;
};

struct RegimeColumn {
  std::size_t column = 0;
  std::vector<Affine> segments;  // change_points.size() + 1 entries
  bool operator==(const RegimeColumn&) const = default;
};

struct RegimePlan {
  std::vector<double> change_points;  // strictly increasing row positions
  Blend blend = Blend::sigmoid;
  double width = 1.0;
  std::vector<RegimeColumn> columns;
  bool operator==(const RegimePlan&) const = default;
};

struct ShiftPlan {
  std::optional<ConfoundingPlan> confounding;
  std::optional<SpuriousPlan> spurious;
  std::optional<std::vector<CovariateShiftColumn>> covariate;
  std::optional<SeasonalPlan> seasonal;
  std::optional<RegimePlan> regime;
  bool operator==(const ShiftPlan&) const = default;
};

/// Shifted target: the latent score for classification, y for regression.
inline Column& shift_target(WorkingTable& t) { return t.classification() ? t.latent : t.y; }

// ---------------------------------------------------------------------------
// Confounding

inline ConfoundingPlan fit_confounding(const WorkingTable& t, const OmegaDraw& w, RngStream rng) {
  ConfoundingPlan p;
  const double strength = w.value(param::confound_strength);
  RngStream z_rng = rng.fork(0);
  p.z.resize(t.rows());
  for (double& v : p.z) v = z_rng.normal();
  const auto m = stats::support_moments(p.z, t.support());
  const double sd = m.std > 0.0 ? m.std : 1.0;
  for (double& v : p.z) v = (v - m.mean) / sd;
  RngStream plan_rng = rng.fork(1);
  p.alpha_x = strength * plan_rng.uniform(0.5, 1.0);
  p.alpha_y = strength * plan_rng.uniform(0.5, 1.0);
  for (std::size_t j = 0; j < t.cols(); ++j) {
    const bool pick = plan_rng.bernoulli(0.5);
    if (pick && t.meta[j].semantic_type != SemanticType::categorical_subgroup) p.columns.push_back(j);
  }
  return p;
}

inline void apply_confounding(const ConfoundingPlan& p, WorkingTable& t) {
  for (auto j : p.columns) {
    for (std::size_t r = 0; r < t.rows(); ++r) t.x[j][r] += p.alpha_x * p.z[r];
  }
  auto& y = shift_target(t);
  for (std::size_t r = 0; r < t.rows(); ++r) y[r] += p.alpha_y * p.z[r];
}

// ---------------------------------------------------------------------------
// Spurious support predictors

/// Target normalized by its support mean and floored support std; for
/// classification the class index is used.
inline Column normalized_target(const WorkingTable& t, double& mean, double& scale) {
  const auto m = stats::support_moments(t.y, t.support());
  mean = m.mean;
  scale = std::max(m.std, kSigmaFloor);
  Column out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) out[r] = (t.y[r] - mean) / scale;
  return out;
}

/// Overwrites the columns least correlated with the target on support;
/// count = round(spurious_fraction * d), at least one.
inline SpuriousPlan fit_spurious(const WorkingTable& t, const OmegaDraw& w, RngStream rng) {
  SpuriousPlan p;
  const Column ycheck = normalized_target(t, p.y_mean, p.y_scale);
  const std::size_t n = t.support();
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t j = 0; j < t.cols(); ++j) {
    if (t.meta[j].semantic_type == SemanticType::categorical_subgroup) continue;
    const double c = stats::pearson(support_of(t.x[j], n), support_of(ycheck, n));
    scored.emplace_back(std::isfinite(c) ? std::fabs(c) : 0.0, j);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  const double frac = w.value(param::spurious_fraction);
  const auto count = std::min<std::size_t>(
      scored.size(), std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(frac * static_cast<double>(t.cols())))));
  const auto lambda = w.ranges.at(std::string(param::spurious_lambda));
  const auto rho = w.ranges.at(std::string(param::spurious_rho));
  for (std::size_t i = 0; i < count; ++i) {
    SpuriousColumn c;
    c.column = scored[i].second;
    c.lambda = rng.uniform(lambda.lo, lambda.hi);
    c.rho = std::clamp(rng.uniform(rho.lo, rho.hi), 1e-6, 1.0);
    c.sign = rng.bernoulli(0.5) ? 1 : -1;
    p.columns.push_back(c);
  }
  std::sort(p.columns.begin(), p.columns.end(),
            [](const SpuriousColumn& a, const SpuriousColumn& b) { return a.column < b.column; });
  return p;
}

/// Support rows: lambda * y + e. Query rows: s * rho * lambda * y + e.
inline void apply_spurious(const SpuriousPlan& p, WorkingTable& t, const RngStream& rng) {
  const std::size_t n = t.support();
  for (const auto& c : p.columns) {
    RngStream col_rng = rng.fork(c.column);
    auto& col = t.x[c.column];
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const double yc = (t.y[r] - p.y_mean) / p.y_scale;
      const double gain = r < n ? c.lambda : c.sign * c.rho * c.lambda;
      col[r] = gain * yc + c.noise_scale * col_rng.normal();
    }
    std::fill(t.mask[c.column].begin(), t.mask[c.column].end(), std::uint8_t{0});
    t.meta[c.column] = ColumnMeta{SemanticType::continuous, Imputation::none, Provenance::spurious, 0};
  }
}

// ---------------------------------------------------------------------------
// Covariate shift

inline std::vector<CovariateShiftColumn> fit_covariate_shift(const WorkingTable& t, const OmegaDraw& w, RngStream rng) {
  const double m = w.value(param::shift_magnitude);
  std::vector<CovariateShiftColumn> out;
  for (std::size_t j = 0; j < t.cols(); ++j) {
    const bool pick = rng.bernoulli(0.5);
    const double delta = rng.uniform(-std::min(m, 0.9), m);
    const double u = rng.uniform(-1.0, 1.0);
    if (!pick || t.meta[j].semantic_type == SemanticType::categorical_subgroup) continue;
    const double sd = std::max(stats::support_moments(t.x[j], t.support()).std, kSigmaFloor);
    out.push_back({j, 1.0 + delta, u * m * sd});
  }
  return out;
}

inline void apply_covariate_shift(const std::vector<CovariateShiftColumn>& cols, WorkingTable& t) {
  for (const auto& c : cols) {
    auto& col = t.x[c.column];
    for (std::size_t r = t.support(); r < col.size(); ++r) col[r] = c.a * col[r] + c.b;
  }
}

// ---------------------------------------------------------------------------
// Seasonal drift

/// Period in [16, T/2] rows; amplitude = ratio * support std of the target.
inline SeasonalPlan fit_seasonal(const WorkingTable& t, const OmegaDraw& w, RngStream rng) {
  SeasonalPlan p;
  const double hi = std::max(16.0, static_cast<double>(t.rows()) / 2.0);
  const double period = rng.uniform(16.0, hi);
  p.frequency = 2.0 * std::numbers::pi / period;
  p.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const Column& y = t.classification() ? t.latent : t.y;
  p.amplitude = w.value(param::seasonal_amplitude_ratio) * std::max(stats::support_moments(y, t.support()).std, kSigmaFloor);
  return p;
}

inline void apply_seasonal(const SeasonalPlan& p, Column& y) {
  for (std::size_t r = 0; r < y.size(); ++r) {
    y[r] += p.amplitude * std::sin(p.frequency * static_cast<double>(r) + p.phase);
  }
}

// ---------------------------------------------------------------------------
// Regime drift

/// Weight of the post-change regime at row t.
inline double regime_weight(Blend blend, double t, double c, double width) {
  return blend == Blend::abrupt ? (t >= c ? 1.0 : 0.0) : stats::sigmoid((t - c) / width);
}

inline double regime_value(const RegimePlan& p, const RegimeColumn& c, double x, double t) {
  double v = c.segments[0].a * x + c.segments[0].b;
  for (std::size_t k = 0; k < p.change_points.size(); ++k) {
    const double w = regime_weight(p.blend, t, p.change_points[k], p.width);
    const auto& seg = c.segments[k + 1];
    v = (1.0 - w) * v + w * (seg.a * x + seg.b);
  }
  return v;
}

/// 1..regime_count change points placed uniformly over the rows, blend width
/// in [1, T/20]. The first segment is the identity.
inline RegimePlan fit_regime(const WorkingTable& t, const OmegaDraw& w, RngStream rng) {
  RegimePlan p;
  const double m = std::max(w.value(param::shift_magnitude), 0.05);
  const auto max_cp = std::max<std::int64_t>(1, std::llround(w.value(param::regime_count)));
  const auto k = static_cast<std::size_t>(rng.integer(1, max_cp));
  const double rows = static_cast<double>(t.rows());
  for (std::size_t i = 0; i < k; ++i) p.change_points.push_back(rng.uniform(0.0, rows));
  std::sort(p.change_points.begin(), p.change_points.end());
  p.change_points.erase(std::unique(p.change_points.begin(), p.change_points.end()), p.change_points.end());
  p.blend = rng.bernoulli(0.5) ? Blend::sigmoid : Blend::abrupt;
  p.width = rng.uniform(1.0, std::max(1.0, rows / 20.0));
  for (std::size_t j = 0; j < t.cols(); ++j) {
    const bool pick = rng.bernoulli(0.5);
    RegimeColumn c;
    c.column = j;
    c.segments.push_back({1.0, 0.0});
    const double sd = std::max(stats::support_moments(t.x[j], t.support()).std, kSigmaFloor);
    for (std::size_t s = 0; s < p.change_points.size(); ++s) {
      const double a = std::max(0.05, 1.0 + rng.uniform(-m, m));
      c.segments.push_back({a, rng.uniform(-m, m) * sd});
    }
    if (pick && t.meta[j].semantic_type != SemanticType::categorical_subgroup) p.columns.push_back(std::move(c));
  }
  return p;
}

inline void apply_regime(const RegimePlan& p, WorkingTable& t) {
  for (const auto& c : p.columns) {
    auto& col = t.x[c.column];
    for (std::size_t r = 0; r < col.size(); ++r) col[r] = regime_value(p, c, col[r], static_cast<double>(r));
  }
}

}  // namespace oprior::shift
