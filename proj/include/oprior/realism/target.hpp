// SPDX-License-Identifier: Apache-2.0
//
// Support-only target normalization, regression extras, and quantile
// discretization with label permutation and flips.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string_view>
#include <vector>

#include "oprior/core/error.hpp"
#include "oprior/core/rng.hpp"
#include "oprior/core/stats.hpp"
#include "oprior/hyperprior.hpp"
#include "oprior/realism/preprocess.hpp"
#include "oprior/realism/table.hpp"

namespace oprior::realism {

enum class TargetExtra : std::uint8_t { skew, heavy_noise, mixture, bounded, censor };
inline constexpr std::size_t kTargetExtraCount = 5;

inline std::string_view to_string(TargetExtra e) {
  switch (e) {
    case TargetExtra::skew: return "skew";
    case TargetExtra::heavy_noise: return "heavy_noise";
    case TargetExtra::mixture: return "mixture";
    case TargetExtra::bounded: return "bounded";
    case TargetExtra::censor: return "censor";
  }
  return "skew";
}

struct TargetTransform {
  TaskKind kind = TaskKind::regression;
  double mean = 0.0;
  double scale = 1.0;
  // regression extras, applied in enum order
  std::vector<TargetExtra> extras;
  double skew_rate = 0.0;
  double noise_scale = 0.0;
  double noise_dof = 4.0;
  double mix_weight = 0.0;
  double mix_loc = 0.0;
  double mix_sd = 0.0;
  double base_sd = 0.0;
  double bound_gain = 1.0;
  double censor_quantile = 1.0;
  double censor_threshold = 0.0;
  // classification
  std::size_t n_classes = 0;
  std::vector<double> boundaries;
  std::vector<std::size_t> permutation;
  double flip_rate = 0.0;
  bool jittered = false;
  bool operator==(const TargetTransform&) const = default;
};

/// K-1 support quantiles at i/K. Returns an empty vector when they are not
/// strictly increasing.
inline std::vector<double> class_boundaries(std::span<const double> support, std::size_t k) {
  std::vector<double> s(support.begin(), support.end());
  std::sort(s.begin(), s.end());
  std::vector<double> b;
  for (std::size_t i = 1; i < k; ++i) {
    const double q = stats::quantile_sorted(s, static_cast<double>(i) / static_cast<double>(k));
    if (!b.empty() && !(q > b.back())) return {};
    b.push_back(q);
  }
  return b;
}

/// Class of a score: number of boundaries at or below it (score < boundary
/// goes to the lower class).
inline std::size_t class_of(const std::vector<double>& boundaries, double score) {
  return static_cast<std::size_t>(std::upper_bound(boundaries.begin(), boundaries.end(), score) - boundaries.begin());
}

/// Labels for a latent score column. Each row draws two uniforms from
/// `rng` in row order, whether or not it flips.
inline Column labels_from_latent(const TargetTransform& tt, std::span<const double> latent, RngStream rng) {
  Column labels(latent.size());
  const std::size_t k = tt.n_classes;
  for (std::size_t t = 0; t < latent.size(); ++t) {
    std::size_t c = class_of(tt.boundaries, latent[t]);
    if (!tt.permutation.empty()) c = tt.permutation[c];
    const double u = rng.uniform();
    const double v = rng.uniform();
    if (u < tt.flip_rate && k > 1) {
      const auto other = std::min<std::size_t>(static_cast<std::size_t>(v * static_cast<double>(k - 1)), k - 2);
      c = other >= c ? other + 1 : other;
    }
    labels[t] = static_cast<double>(c);
  }
  return labels;
}

/// Fits boundaries on the support latent. Tied quantiles are broken by adding
/// N(0, 1e-6^2) jitter to every row of the latent (rows in order).
inline void fit_discretization(TargetTransform& tt, Column& latent, std::size_t n, RngStream rng) {
  tt.boundaries = class_boundaries(support_of(latent, n), tt.n_classes);
  tt.jittered = false;
  if (tt.boundaries.empty() && tt.n_classes > 1) {
    for (double& v : latent) v += 1e-6 * rng.normal();
    tt.jittered = true;
    tt.boundaries = class_boundaries(support_of(latent, n), tt.n_classes);
    if (tt.boundaries.empty()) throw NumericError("class boundaries are not strictly increasing");
  }
}

inline double apply_regression_extras(const TargetTransform& tt, double y, RngStream& rng) {
  const double e_noise = rng.student_t(tt.noise_dof);
  const double u_mix = rng.uniform();
  const double e_mix = rng.normal();
  for (auto e : tt.extras) {
    switch (e) {
      case TargetExtra::skew: {
        const double cap = 50.0 / std::fabs(tt.skew_rate);
        y = std::expm1(tt.skew_rate * std::clamp(y, -cap, cap)) / tt.skew_rate;
        break;
      }
      case TargetExtra::heavy_noise: y += tt.noise_scale * e_noise; break;
      case TargetExtra::mixture: y += u_mix < tt.mix_weight ? tt.mix_loc + tt.mix_sd * e_mix : tt.base_sd * e_mix; break;
      case TargetExtra::bounded: y = stats::sigmoid(tt.bound_gain * y); break;
      case TargetExtra::censor: y = std::min(y, tt.censor_threshold); break;
    }
  }
  return y;
}

/// Normalizes with support mean and floored support std. Regression then
/// applies extras; classification discretizes the normalized latent into
/// n_classes classes. With `realism` off there are no extras, no
/// permutation and no flips.
inline TargetTransform transform_target(WorkingTable& t, const OmegaDraw& w, bool realism, RngStream& rng) {
  const std::size_t n = t.support();
  TargetTransform tt;
  tt.kind = t.dims.task_kind;
  const auto support = support_of(t.y, n);
  tt.mean = stats::mean(support);
  tt.scale = std::max(stats::stddev(support), kSigmaFloor);
  for (double& v : t.y) v = (v - tt.mean) / tt.scale;

  RngStream plan_rng = rng.fork(0);
  if (tt.kind == TaskKind::regression) {
    if (!realism) return tt;
    const double p = w.value(param::morph_probability);
    for (std::size_t e = 0; e < kTargetExtraCount; ++e) {
      if (plan_rng.uniform() < p) tt.extras.push_back(static_cast<TargetExtra>(e));
    }
    tt.skew_rate = (plan_rng.bernoulli(0.5) ? 1.0 : -1.0) * plan_rng.uniform(0.2, 1.0);
    tt.noise_scale = plan_rng.uniform(0.1, 0.5);
    tt.noise_dof = plan_rng.uniform(2.5, 5.0);
    tt.mix_weight = plan_rng.uniform(0.05, 0.3);
    tt.mix_loc = (plan_rng.bernoulli(0.5) ? 1.0 : -1.0) * plan_rng.uniform(1.0, 3.0);
    tt.mix_sd = plan_rng.uniform(0.1, 0.5);
    tt.base_sd = plan_rng.uniform(0.05, 0.2);
    tt.bound_gain = plan_rng.uniform(0.5, 2.0);
    tt.censor_quantile = plan_rng.uniform(0.6, 0.95);
    if (tt.extras.empty()) return tt;
    const bool censor = tt.extras.back() == TargetExtra::censor;
    if (censor) tt.extras.pop_back();
    RngStream row_rng = rng.fork(1);
    for (double& v : t.y) v = apply_regression_extras(tt, v, row_rng);
    if (censor) {
      tt.censor_threshold = stats::quantile(support_of(t.y, n), tt.censor_quantile);
      for (double& v : t.y) v = std::min(v, tt.censor_threshold);
      tt.extras.push_back(TargetExtra::censor);
    }
    return tt;
  }

  tt.n_classes = t.dims.n_classes;
  if (tt.n_classes < 2 || tt.n_classes > kMaxClasses) throw ConfigError("class count outside [2, 16]");
  t.latent = t.y;
  if (realism) {
    tt.flip_rate = w.value(param::label_flip_rate);
    if (plan_rng.bernoulli(0.5)) tt.permutation = plan_rng.permutation(tt.n_classes);
  }
  fit_discretization(tt, t.latent, n, rng.fork(2));
  t.y = labels_from_latent(tt, t.latent, rng.fork(3));
  return tt;
}

/// Re-discretizes after later stages moved the latent score; boundaries are
/// refitted on support and the flip stream is reused.
inline void relabel(TargetTransform& tt, WorkingTable& t, const RngStream& rng) {
  if (tt.kind != TaskKind::classification) return;
  fit_discretization(tt, t.latent, t.support(), rng.fork(4));
  t.y = labels_from_latent(tt, t.latent, rng.fork(3));
}

}  // namespace oprior::realism
