// SPDX-License-Identifier: Apache-2.0
//
// Realism profiles, the curriculum schedule and per-episode hyperparameter
// draws. A profile is a keyed table of numeric ranges and weighted discrete
// supports; every profile shares one key set so two profiles can be mixed.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "oprior/core/error.hpp"
#include "oprior/core/rng.hpp"

namespace oprior {

/// Parameter keys. Numeric ranges first, then discrete supports.
namespace param {
inline constexpr std::string_view missing_rate = "missing_rate";
inline constexpr std::string_view tail_severity = "tail_severity";
inline constexpr std::string_view confound_strength = "confound_strength";
inline constexpr std::string_view spurious_fraction = "spurious_fraction";
inline constexpr std::string_view spurious_lambda = "spurious_lambda";
inline constexpr std::string_view spurious_rho = "spurious_rho";
inline constexpr std::string_view shift_magnitude = "shift_magnitude";
inline constexpr std::string_view morph_probability = "morph_probability";
inline constexpr std::string_view label_flip_rate = "label_flip_rate";
inline constexpr std::string_view seasonal_amplitude_ratio = "seasonal_amplitude_ratio";
inline constexpr std::string_view regime_count = "regime_count";
inline constexpr std::string_view subgroup_probability = "subgroup_probability";
inline constexpr std::string_view augmentation_probability = "augmentation_probability";
inline constexpr std::string_view hetero_alpha = "hetero_alpha";
inline constexpr std::string_view kappa = "kappa";
inline constexpr std::string_view missing_beta = "missing_beta";
inline constexpr std::string_view support_fraction = "support_fraction";
inline constexpr std::string_view n_classes = "n_classes";

inline constexpr std::string_view task_kind = "task_kind";
inline constexpr std::string_view missing_mechanism = "missing_mechanism";
inline constexpr std::string_view imputation = "imputation";
inline constexpr std::string_view preprocess_map = "preprocess_map";
inline constexpr std::string_view gate_confounding = "gate_confounding";
inline constexpr std::string_view gate_spurious = "gate_spurious";
inline constexpr std::string_view gate_covariate_shift = "gate_covariate_shift";
inline constexpr std::string_view gate_seasonal_drift = "gate_seasonal_drift";
inline constexpr std::string_view gate_regime_drift = "gate_regime_drift";
}  // namespace param

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] bool valid() const { return std::isfinite(lo) && std::isfinite(hi) && lo <= hi; }
  [[nodiscard]] bool contains(double v) const { return v >= lo && v <= hi; }
  [[nodiscard]] bool within(const ParamRange& outer) const { return lo >= outer.lo && hi <= outer.hi; }
  bool operator==(const ParamRange&) const = default;
};

/// Weighted list of enum values, keyed by name.
struct DiscreteSupport {
  std::map<std::string, double> weights;

  [[nodiscard]] bool valid() const {
    if (weights.empty()) return false;
    double total = 0.0;
    for (const auto& [_, w] : weights) {
      if (!std::isfinite(w) || w < 0.0) return false;
      total += w;
    }
    return total > 0.0;
  }
  [[nodiscard]] double probability(const std::string& key) const {
    double total = 0.0;
    for (const auto& [_, w] : weights) total += w;
    const auto it = weights.find(key);
    return it == weights.end() || total <= 0.0 ? 0.0 : it->second / total;
  }
  bool operator==(const DiscreteSupport&) const = default;
};

inline DiscreteSupport gate_support(double on_probability) {
  return DiscreteSupport{{{"off", 1.0 - on_probability}, {"on", on_probability}}};
}

enum class ProfileName : std::uint8_t { low, mild, hard, mixed };

inline std::string_view to_string(ProfileName p) {
  switch (p) {
    case ProfileName::low: return "LOW";
    case ProfileName::mild: return "MILD";
    case ProfileName::hard: return "HARD";
    case ProfileName::mixed: return "MIXED";
  }
  return "MIXED";
}

inline ProfileName parse_profile_name(std::string_view s) {
  if (s == "LOW" || s == "low") return ProfileName::low;
  if (s == "MILD" || s == "mild") return ProfileName::mild;
  if (s == "HARD" || s == "hard") return ProfileName::hard;
  throw ConfigError("unknown realism profile '" + std::string(s) + "' (expected LOW, MILD or HARD)");
}

struct RealismProfile {
  ProfileName name = ProfileName::mixed;
  std::map<std::string, ParamRange> ranges;
  std::map<std::string, DiscreteSupport> choices;

  [[nodiscard]] const ParamRange& range(std::string_view key) const {
    const auto it = ranges.find(std::string(key));
    if (it == ranges.end()) throw ConfigError("profile has no range '" + std::string(key) + "'");
    return it->second;
  }
  [[nodiscard]] const DiscreteSupport& choice(std::string_view key) const {
    const auto it = choices.find(std::string(key));
    if (it == choices.end()) throw ConfigError("profile has no choice '" + std::string(key) + "'");
    return it->second;
  }
  [[nodiscard]] bool valid() const {
    return std::all_of(ranges.begin(), ranges.end(), [](const auto& kv) { return kv.second.valid(); }) &&
           std::all_of(choices.begin(), choices.end(), [](const auto& kv) { return kv.second.valid(); });
  }
  bool operator==(const RealismProfile&) const = default;
};

/// Result of mixing two profiles; same shape as a profile.
using EffectiveProfile = RealismProfile;

// Preset values are configuration defaults, overridable from the config file.
// Numeric supports are nested LOW within MILD within HARD.
inline RealismProfile preset_profile(ProfileName name) {
  const int level = name == ProfileName::low ? 0 : name == ProfileName::mild ? 1 : 2;
  auto pick = [level](ParamRange low, ParamRange mild, ParamRange hard) {
    return level == 0 ? low : level == 1 ? mild : hard;
  };
  RealismProfile p;
  p.name = name;
  auto& r = p.ranges;
  r[std::string(param::missing_rate)] = pick({0, 0.05}, {0, 0.25}, {0, 0.60});
  r[std::string(param::tail_severity)] = pick({0, 0.1}, {0, 0.5}, {0, 1.0});
  r[std::string(param::confound_strength)] = pick({0, 0.1}, {0, 0.5}, {0, 1.5});
  r[std::string(param::spurious_fraction)] = pick({0, 0}, {0, 0.1}, {0, 0.3});
  r[std::string(param::spurious_lambda)] = pick({0.5, 0.5}, {0.5, 2}, {0.5, 4});
  r[std::string(param::spurious_rho)] = {0.25, 1.0};
  r[std::string(param::shift_magnitude)] = pick({0, 0.05}, {0, 0.3}, {0, 1.0});
  r[std::string(param::morph_probability)] = pick({0, 0.1}, {0, 0.4}, {0, 0.8});
  r[std::string(param::label_flip_rate)] = pick({0, 0}, {0, 0.05}, {0, 0.2});
  r[std::string(param::seasonal_amplitude_ratio)] = pick({0, 0.1}, {0, 0.5}, {0, 1.0});
  r[std::string(param::regime_count)] = pick({1, 1}, {1, 2}, {1, 4});
  r[std::string(param::subgroup_probability)] = pick({0, 0.05}, {0, 0.3}, {0, 0.6});
  r[std::string(param::augmentation_probability)] = pick({0, 0.05}, {0, 0.3}, {0, 0.6});
  r[std::string(param::hetero_alpha)] = pick({0, 0.25}, {0, 0.5}, {0, 1.0});
  r[std::string(param::kappa)] = pick({4, 6}, {3, 6}, {2, 6});
  r[std::string(param::missing_beta)] = {1, 5};
  r[std::string(param::support_fraction)] = {0.3, 0.9};
  r[std::string(param::n_classes)] = {2, 10};

  auto& c = p.choices;
  c[std::string(param::task_kind)] = DiscreteSupport{{{"classification", 0.5}, {"regression", 0.5}}};
  c[std::string(param::missing_mechanism)] = DiscreteSupport{{{"mar", 1.0}, {"mcar", 1.0}, {"mnar", 1.0}}};
  c[std::string(param::imputation)] =
      DiscreteSupport{{{"constant", 1.0}, {"gaussian", 1.0}, {"mean", 1.0}, {"median", 1.0}, {"sampled", 1.0}}};
  c[std::string(param::preprocess_map)] = DiscreteSupport{{{"log_shift", 1.0},
                                                           {"none", 1.0},
                                                           {"power", 1.0},
                                                           {"quantile", 1.0},
                                                           {"rank_gauss", 1.0},
                                                           {"standardize", 2.0}}};
  const double gate = level == 0 ? 0.0 : level == 1 ? 0.3 : 0.6;
  for (auto key : {param::gate_confounding, param::gate_spurious, param::gate_covariate_shift,
                   param::gate_seasonal_drift, param::gate_regime_drift}) {
    c[std::string(key)] = gate_support(gate);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Curriculum

enum class ScheduleKind : std::uint8_t { none, linear, cosine, step };

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::none: return "none";
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::cosine: return "cosine";
    case ScheduleKind::step: return "step";
  }
  return "none";
}

inline ScheduleKind parse_schedule_kind(std::string_view s) {
  if (s == "none") return ScheduleKind::none;
  if (s == "linear") return ScheduleKind::linear;
  if (s == "cosine") return ScheduleKind::cosine;
  if (s == "step") return ScheduleKind::step;
  throw ConfigError("unknown schedule '" + std::string(s) + "' (expected none, linear, cosine or step)");
}

struct CurriculumSchedule {
  ScheduleKind kind = ScheduleKind::none;
  std::uint64_t warmup = 1;  // S0
  ProfileName start = ProfileName::low;
  ProfileName end = ProfileName::hard;
  std::uint64_t step_count = 4;

  bool operator==(const CurriculumSchedule&) const = default;
};

/// Mixing weight alpha(s) in [0, 1]; kind none always returns 1.
inline double schedule_alpha(const CurriculumSchedule& sched, std::uint64_t s) {
  if (sched.warmup < 1) throw ConfigError("curriculum warmup must be >= 1");
  const double frac = static_cast<double>(s) / static_cast<double>(sched.warmup);
  switch (sched.kind) {
    case ScheduleKind::none:
      return 1.0;
    case ScheduleKind::linear:
      return std::min(1.0, frac);
    case ScheduleKind::cosine:
      return s >= sched.warmup ? 1.0 : 0.5 * (1.0 - std::cos(std::numbers::pi * frac));
    case ScheduleKind::step: {
      const auto steps = std::max<std::uint64_t>(1, sched.step_count);
      const auto k = static_cast<double>((steps * s) / sched.warmup);
      return std::min(1.0, k / static_cast<double>(steps));
    }
  }
  return 1.0;
}

/// (1 - alpha) * P0 + alpha * P1 over numeric endpoints and discrete weights.
inline EffectiveProfile mix_profiles(const RealismProfile& p0, const RealismProfile& p1, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("mixing weight must lie in [0, 1]");
  if (p0.ranges.size() != p1.ranges.size() || p0.choices.size() != p1.choices.size()) {
    throw ConfigError("profiles have different parameter sets");
  }
  if (alpha == 0.0) return p0;
  if (alpha == 1.0) return p1;
  EffectiveProfile out;
  out.name = ProfileName::mixed;
  for (const auto& [key, r0] : p0.ranges) {
    const auto it = p1.ranges.find(key);
    if (it == p1.ranges.end()) throw ConfigError("profiles disagree on range '" + key + "'");
    const auto& r1 = it->second;
    out.ranges[key] = {(1.0 - alpha) * r0.lo + alpha * r1.lo, (1.0 - alpha) * r0.hi + alpha * r1.hi};
  }
  for (const auto& [key, d0] : p0.choices) {
    const auto it = p1.choices.find(key);
    if (it == p1.choices.end()) throw ConfigError("profiles disagree on choice '" + key + "'");
    DiscreteSupport mixed;
    for (const auto& [v, w] : d0.weights) mixed.weights[v] += (1.0 - alpha) * w;
    for (const auto& [v, w] : it->second.weights) mixed.weights[v] += alpha * w;
    out.choices[key] = std::move(mixed);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Draws

/// One concrete hyperparameter draw for an episode.
struct OmegaDraw {
  std::map<std::string, double> values;
  std::map<std::string, std::string> choices;
  /// Effective discrete supports, kept for per-column draws downstream.
  std::map<std::string, DiscreteSupport> supports;
  /// Effective numeric ranges each value was drawn from.
  std::map<std::string, ParamRange> ranges;
  bool confounding = false;
  bool spurious = false;
  bool covariate_shift = false;
  bool seasonal_drift = false;
  bool regime_drift = false;
  bool subgroups = false;
  bool augmentation = false;

  [[nodiscard]] double value(std::string_view key) const {
    const auto it = values.find(std::string(key));
    if (it == values.end()) throw ConfigError("omega has no value '" + std::string(key) + "'");
    return it->second;
  }
  [[nodiscard]] const std::string& choice(std::string_view key) const {
    const auto it = choices.find(std::string(key));
    if (it == choices.end()) throw ConfigError("omega has no choice '" + std::string(key) + "'");
    return it->second;
  }
  [[nodiscard]] const DiscreteSupport& support(std::string_view key) const {
    const auto it = supports.find(std::string(key));
    if (it == supports.end()) throw ConfigError("omega has no support '" + std::string(key) + "'");
    return it->second;
  }
  [[nodiscard]] bool any_shift_gate() const {
    return confounding || spurious || covariate_shift || seasonal_drift || regime_drift;
  }
  bool operator==(const OmegaDraw&) const = default;
};

/// Draws an entry of a discrete support by weight.
inline std::string draw_choice(const DiscreteSupport& support, RngStream& rng) {
  std::vector<double> w;
  std::vector<const std::string*> keys;
  for (const auto& [k, v] : support.weights) {
    keys.push_back(&k);
    w.push_back(v);
  }
  if (keys.empty()) throw ConfigError("empty discrete support");
  return *keys[rng.categorical(w)];
}

/// Uniform within each numeric range, weighted draw for each discrete support.
/// One uniform per key in sorted key order, so profiles sharing a key set
/// consume the stream identically.
inline OmegaDraw sample_omega(const EffectiveProfile& eff, RngStream& rng) {
  OmegaDraw w;
  for (const auto& [key, r] : eff.ranges) {
    const double u = rng.uniform();
    w.values[key] = r.lo == r.hi ? r.lo : std::clamp(r.lo + (r.hi - r.lo) * u, r.lo, r.hi);
    w.ranges[key] = r;
  }
  for (const auto& [key, support] : eff.choices) {
    w.choices[key] = draw_choice(support, rng);
    w.supports[key] = support;
  }
  auto gate = [&](std::string_view key) {
    const auto it = w.choices.find(std::string(key));
    return it != w.choices.end() && it->second == "on";
  };
  w.confounding = gate(param::gate_confounding);
  w.spurious = gate(param::gate_spurious);
  w.covariate_shift = gate(param::gate_covariate_shift);
  w.seasonal_drift = gate(param::gate_seasonal_drift);
  w.regime_drift = gate(param::gate_regime_drift);
  const double u_sub = rng.uniform();
  const double u_aug = rng.uniform();
  if (const auto it = w.values.find(std::string(param::subgroup_probability)); it != w.values.end()) {
    w.subgroups = u_sub < it->second;
  }
  if (const auto it = w.values.find(std::string(param::augmentation_probability)); it != w.values.end()) {
    w.augmentation = u_aug < it->second;
  }
  return w;
}

}  // namespace oprior
