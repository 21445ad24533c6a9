// SPDX-License-Identifier: Apache-2.0
//
// Generator configuration as JSON. Every key is optional; absent keys keep
// the value of the named base variant.
//
//   {
//     "variant": "G4",
//     "toggles": {"sm": true, "sh": true, "realism": "hard", "sd": true, "curriculum": true},
//     "schedule": {"kind": "linear", "warmup": 2500, "start": "low", "end": "hard", "step_count": 4},
//     "dims": {"rows_min": 512, "rows_max": 1024, "features_min": 3, "features_max": 50},
//     "qc": {"min_active_features": 2, "near_constant_std": 1e-6, "min_class_count": 2,
//            "min_target_std": 1e-3, "max_resamples": 20},
//     "scm": {"nodes_min": 2, "nodes_max": 6, "width_min": 4, "width_max": 32, "parents_max": 3},
//     "batch_size": 4,
//     "profiles": {"hard": {"ranges": {"missing_rate": [0, 0.6]}, "choices": {"imputation": {"mean": 1}}}}
//   }
#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "oprior/core/error.hpp"
#include "oprior/io/episode_file.hpp"
#include "oprior/variant.hpp"

namespace oprior::io {

inline constexpr const char* kConfigEnvVar = "OPRIOR_CONFIG";

namespace detail {

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::json profile_to_json(const RealismProfile& p) {
  nlohmann::json ranges = nlohmann::json::object();
  for (const auto& [k, r] : p.ranges) ranges[k] = {r.lo, r.hi};
  nlohmann::json choices = nlohmann::json::object();
  for (const auto& [k, d] : p.choices) choices[k] = d.weights;
  return {{"ranges", ranges}, {"choices", choices}};
}

/// Overrides keys of `base`; unknown keys are rejected so typos surface.
inline RealismProfile profile_from_json(const nlohmann::json& j, RealismProfile base) {
  if (j.contains("ranges")) {
    for (const auto& [k, v] : j.at("ranges").items()) {
      if (!base.ranges.contains(k)) throw ConfigError("unknown profile range '" + k + "'");
      if (!v.is_array() || v.size() != 2) throw ConfigError("range '" + k + "' must be [lo, hi]");
      base.ranges[k] = ParamRange{v[0].get<double>(), v[1].get<double>()};
    }
  }
  if (j.contains("choices")) {
    for (const auto& [k, v] : j.at("choices").items()) {
      if (!base.choices.contains(k)) throw ConfigError("unknown profile choice '" + k + "'");
      DiscreteSupport d;
      for (const auto& [option, w] : v.items()) d.weights[option] = w.get<double>();
      base.choices[k] = d;
    }
  }
  if (!base.valid()) throw ConfigError("profile has invalid ranges or weights");
  return base;
}

inline nlohmann::json config_to_json(const VariantConfig& c) {
  nlohmann::json profiles = nlohmann::json::object();
  for (const auto& [name, p] : c.profiles) profiles[name] = profile_to_json(p);
  return {
      {"variant", c.name},
      {"toggles",
       {{"sm", c.base_scm},
        {"sh", c.hybrid_scm},
        {"realism", std::string(to_string(c.realism))},
        {"sd", c.shift},
        {"curriculum", c.curriculum}}},
      {"schedule",
       {{"kind", std::string(to_string(c.schedule.kind))},
        {"warmup", c.schedule.warmup},
        {"start", std::string(to_string(c.schedule.start))},
        {"end", std::string(to_string(c.schedule.end))},
        {"step_count", c.schedule.step_count}}},
      {"dims",
       {{"rows_min", c.dims.rows_min},
        {"rows_max", c.dims.rows_max},
        {"features_min", c.dims.features_min},
        {"features_max", c.dims.features_max}}},
      {"qc",
       {{"min_active_features", c.qc.min_active_features},
        {"near_constant_std", c.qc.near_constant_std},
        {"min_class_count", c.qc.min_class_count},
        {"min_target_std", c.qc.min_target_std},
        {"max_resamples", c.qc.max_resamples}}},
      {"scm",
       {{"nodes_min", c.scm.nodes_min},
        {"nodes_max", c.scm.nodes_max},
        {"width_min", c.scm.width_min},
        {"width_max", c.scm.width_max},
        {"parents_max", c.scm.parents_max}}},
      {"batch_size", c.batch_size},
      {"profiles", profiles},
  };
}

inline VariantConfig config_from_json(const nlohmann::json& j) {
  try {
    VariantConfig c = named_variant(j.value("variant", std::string("full")));
    if (j.contains("toggles")) {
      const auto& t = j.at("toggles");
      detail::read_key(t, "sm", c.base_scm);
      detail::read_key(t, "sh", c.hybrid_scm);
      if (t.contains("realism")) c.realism = parse_realism_level(t.at("realism").get<std::string>());
      detail::read_key(t, "sd", c.shift);
      detail::read_key(t, "curriculum", c.curriculum);
    }
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      if (s.contains("kind")) c.schedule.kind = parse_schedule_kind(s.at("kind").get<std::string>());
      detail::read_key(s, "warmup", c.schedule.warmup);
      if (s.contains("start")) c.schedule.start = parse_profile_name(s.at("start").get<std::string>());
      if (s.contains("end")) c.schedule.end = parse_profile_name(s.at("end").get<std::string>());
      detail::read_key(s, "step_count", c.schedule.step_count);
    }
    if (j.contains("dims")) {
      const auto& d = j.at("dims");
      detail::read_key(d, "rows_min", c.dims.rows_min);
      detail::read_key(d, "rows_max", c.dims.rows_max);
      detail::read_key(d, "features_min", c.dims.features_min);
      detail::read_key(d, "features_max", c.dims.features_max);
    }
    if (j.contains("qc")) {
      const auto& q = j.at("qc");
      detail::read_key(q, "min_active_features", c.qc.min_active_features);
      detail::read_key(q, "near_constant_std", c.qc.near_constant_std);
      detail::read_key(q, "min_class_count", c.qc.min_class_count);
      detail::read_key(q, "min_target_std", c.qc.min_target_std);
      detail::read_key(q, "max_resamples", c.qc.max_resamples);
    }
    if (j.contains("scm")) {
      const auto& s = j.at("scm");
      detail::read_key(s, "nodes_min", c.scm.nodes_min);
      detail::read_key(s, "nodes_max", c.scm.nodes_max);
      detail::read_key(s, "width_min", c.scm.width_min);
      detail::read_key(s, "width_max", c.scm.width_max);
      detail::read_key(s, "parents_max", c.scm.parents_max);
    }
    detail::read_key(j, "batch_size", c.batch_size);
    if (j.contains("profiles")) {
      for (const auto& [name, p] : j.at("profiles").items()) {
        const auto pn = parse_profile_name(name);
        c.profiles[std::string(to_string(pn))] = profile_from_json(p, c.profile(pn));
      }
    }
    if (const auto why = c.invalid_reason(); !why.empty()) throw ConfigError(why);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_bytes(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse '" + path.string() + "': " + e.what());
  }
}

inline VariantConfig read_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path)); }

/// Path named by the config environment variable, or empty.
inline std::filesystem::path default_config_path() {
  const char* v = std::getenv(kConfigEnvVar);
  return v != nullptr ? std::filesystem::path(v) : std::filesystem::path();
}

}  // namespace oprior::io
