// SPDX-License-Identifier: Apache-2.0
//
// Named generator configurations (ablation variants) and their settings.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "oprior/core/error.hpp"
#include "oprior/hyperprior.hpp"
#include "oprior/qc.hpp"
#include "oprior/scm/dag.hpp"

namespace oprior {

enum class RealismLevel : std::uint8_t { off, mild, hard };

inline std::string_view to_string(RealismLevel r) {
  switch (r) {
    case RealismLevel::off: return "off";
    case RealismLevel::mild: return "mild";
    case RealismLevel::hard: return "hard";
  }
  return "off";
}

inline RealismLevel parse_realism_level(std::string_view s) {
  for (auto r : {RealismLevel::off, RealismLevel::mild, RealismLevel::hard}) {
    if (to_string(r) == s) return r;
  }
  throw ConfigError("unknown realism level '" + std::string(s) + "'");
}

struct DimsRanges {
  std::size_t rows_min = 512;
  std::size_t rows_max = 1024;
  std::size_t features_min = 3;
  std::size_t features_max = 50;

  [[nodiscard]] bool valid() const {
    return rows_min >= 4 && rows_min <= rows_max && features_min >= 1 && features_min <= features_max;
  }
  bool operator==(const DimsRanges&) const = default;
};

struct VariantConfig {
  std::string name = "full";
  bool base_scm = true;     // SM: single-mechanism tasks
  bool hybrid_scm = true;   // SH: hybrid DAG tasks
  RealismLevel realism = RealismLevel::hard;
  bool shift = true;        // SD
  bool curriculum = true;
  CurriculumSchedule schedule{ScheduleKind::linear, 2500, ProfileName::low, ProfileName::hard, 4};
  DimsRanges dims;
  QcThresholds qc;
  scm::ScmOptions scm;
  std::size_t batch_size = 4;
  /// Profile overrides by name; missing names use the presets.
  std::map<std::string, RealismProfile> profiles;

  [[nodiscard]] RealismProfile profile(ProfileName p) const {
    const auto it = profiles.find(std::string(to_string(p)));
    return it != profiles.end() ? it->second : preset_profile(p);
  }
  /// Profile used when no curriculum runs: the realism level, else HARD when
  /// only shift stress is on, else LOW.
  [[nodiscard]] ProfileName static_profile() const {
    if (realism == RealismLevel::mild) return ProfileName::mild;
    if (realism == RealismLevel::hard || shift) return ProfileName::hard;
    return ProfileName::low;
  }
  [[nodiscard]] std::string invalid_reason() const {
    if (!base_scm && !hybrid_scm) return "at least one of SM and SH must be enabled";
    if (!dims.valid()) return "invalid dims ranges";
    if (!qc.valid()) return "invalid QC thresholds";
    if (batch_size == 0) return "batch size must be positive";
    if (curriculum && schedule.kind != ScheduleKind::none && schedule.warmup == 0) return "warmup must be positive";
    return {};
  }
  bool operator==(const VariantConfig&) const = default;
};

inline constexpr std::array<std::string_view, 11> kVariantNames{"G1a", "G1b", "G1c", "G2a", "G2b", "G2c",
                                                                "G3a", "G3b", "G4",  "full", "custom"};

inline std::string variant_names_joined() {
  std::string s;
  for (auto n : kVariantNames) {
    if (!s.empty()) s += ", ";
    s += n;
  }
  return s;
}

/// Component sets: SM, SH, MR, SR, SD and curriculum per named variant.
/// "full" equals G4; "custom" starts from G4 and is meant to be edited.
inline VariantConfig named_variant(std::string_view name) {
  VariantConfig c;
  c.name = std::string(name);
  c.curriculum = false;
  c.schedule.kind = ScheduleKind::none;
  auto set = [&](bool sm, bool sh, RealismLevel r, bool sd) {
    c.base_scm = sm;
    c.hybrid_scm = sh;
    c.realism = r;
    c.shift = sd;
  };
  using R = RealismLevel;
  if (name == "G1a") {
    set(true, false, R::off, false);
  } else if (name == "G1b") {
    set(false, true, R::off, false);
  } else if (name == "G1c") {
    set(true, true, R::off, false);
  } else if (name == "G2a") {
    set(true, false, R::mild, false);
  } else if (name == "G2b") {
    set(true, false, R::hard, false);
  } else if (name == "G2c") {
    set(true, true, R::hard, false);
  } else if (name == "G3a") {
    set(true, false, R::off, true);
  } else if (name == "G3b") {
    set(true, true, R::off, true);
  } else if (name == "G4" || name == "full" || name == "custom") {
    set(true, true, R::hard, true);
    c.curriculum = true;
    c.schedule = CurriculumSchedule{ScheduleKind::linear, 2500, ProfileName::low, ProfileName::hard, 4};
  } else {
    throw ConfigError("unknown variant '" + std::string(name) + "'; valid variants: " + variant_names_joined());
  }
  return c;
}

}  // namespace oprior
