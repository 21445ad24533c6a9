// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: generate, eval, describe, validate.
// Exit codes: 0 success, 1 usage error, 2 runtime error.
#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oprior/eval/alignment.hpp"
#include "oprior/eval/describe.hpp"
#include "oprior/io/config.hpp"
#include "oprior/io/csv.hpp"
#include "oprior/io/episode_file.hpp"
#include "oprior/io/manifest.hpp"
#include "oprior/pipeline.hpp"
#include "oprior/qc.hpp"
#include "oprior/variant.hpp"

namespace oprior::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kRuntime = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

/// Config file named by --config, else the environment variable, else {}.
inline nlohmann::json load_config_json(const std::string& flag) {
  std::filesystem::path p = flag.empty() ? io::default_config_path() : std::filesystem::path(flag);
  if (p.empty()) return nlohmann::json::object();
  return io::read_json_file(p);
}

inline void check_variant_name(const std::string& name) {
  if (std::find(kVariantNames.begin(), kVariantNames.end(), name) == kVariantNames.end()) {
    throw UsageError("unknown variant '" + name + "'; valid variants: " + variant_names_joined());
  }
}

inline void write_json(const nlohmann::json& j, const std::string& path, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << j.dump(2) << '\n';
    return;
  }
  io::write_bytes(path, j.dump(2) + "\n");
}

template <class T>
void from_section(const nlohmann::json& cfg, const char* section, const char* key, T& value) {
  if (cfg.contains(section) && cfg.at(section).contains(key)) value = cfg.at(section).at(key).get<T>();
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string variant;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> rows_min, rows_max, features_min, features_max;
  std::optional<std::uint64_t> warmup;
  std::string schedule;
};

inline void add_generate(CLI::App& app, GenerateArgs& a) {
  app.add_option("--variant", a.variant, "Named variant: " + variant_names_joined());
  app.add_option("--count", a.count, "Number of episodes")->check(CLI::PositiveNumber);
  app.add_option("--seed", a.seed, "Master seed");
  app.add_option("--out", a.out, "Output directory");
  app.add_option("--config", a.config, "Config JSON (default: $" + std::string(io::kConfigEnvVar) + ")");
  app.add_option("--workers", a.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--rows-min", a.rows_min);
  app.add_option("--rows-max", a.rows_max);
  app.add_option("--features-min", a.features_min);
  app.add_option("--features-max", a.features_max);
  app.add_option("--warmup", a.warmup, "Curriculum warmup S0 in batches");
  app.add_option("--schedule", a.schedule, "Curriculum schedule")->check(CLI::IsMember({"none", "linear", "cosine", "step"}));
}

/// Config file first, then explicit flags.
inline VariantConfig resolve_variant(nlohmann::json cfg_json, const std::string& variant_flag) {
  if (!variant_flag.empty()) {
    check_variant_name(variant_flag);
    cfg_json["variant"] = variant_flag;
  } else if (cfg_json.contains("variant")) {
    check_variant_name(cfg_json.at("variant").get<std::string>());
  } else {
    throw UsageError("--variant is required (valid variants: " + variant_names_joined() + ")");
  }
  return io::config_from_json(cfg_json);
}

inline int run_generate(GenerateArgs a, Streams io_) {
  const auto cfg_json = load_config_json(a.config);
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t workers = 1;
  from_section(cfg_json, "generate", "count", count);
  from_section(cfg_json, "generate", "seed", seed);
  from_section(cfg_json, "generate", "out", out);
  from_section(cfg_json, "generate", "workers", workers);
  if (a.count) count = *a.count;
  if (a.seed) seed = *a.seed;
  if (!a.out.empty()) out = a.out;
  if (a.workers) workers = *a.workers;
  if (count == 0) throw UsageError("--count is required");
  if (workers == 0) throw UsageError("--workers must be positive");
  if (out.empty()) throw UsageError("--out is required");
  VariantConfig cfg = resolve_variant(cfg_json, a.variant);
  if (a.rows_min) cfg.dims.rows_min = *a.rows_min;
  if (a.rows_max) cfg.dims.rows_max = *a.rows_max;
  if (a.features_min) cfg.dims.features_min = *a.features_min;
  if (a.features_max) cfg.dims.features_max = *a.features_max;
  if (a.warmup) cfg.schedule.warmup = *a.warmup;
  if (!a.schedule.empty()) cfg.schedule.kind = parse_schedule_kind(a.schedule);
  if (const auto why = cfg.invalid_reason(); !why.empty()) throw UsageError(why);

  io_.err << "generating " << count << " episodes (" << cfg.name << ", seed " << seed << ", " << workers
          << " workers)\n";
  std::size_t last_pct = 0;
  const auto summary = generate_batch(cfg, count, seed, workers, out, [&](std::size_t done, std::size_t total) {
    const std::size_t pct = 100 * done / total;
    if (pct >= last_pct + 10 || done == total) {
      last_pct = pct;
      io_.err << "  " << done << "/" << total << "\n";
    }
  });
  const double rate = summary.seconds > 0.0 ? static_cast<double>(summary.requested) / summary.seconds : 0.0;
  io_.out << nlohmann::json{{"accepted", summary.accepted},
                            {"rejected", summary.exhausted},
                            {"attempts", summary.total_attempts},
                            {"wall_seconds", summary.seconds},
                            {"episodes_per_second", rate}}
                 .dump()
          << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string reference;
  std::string variant;
  std::string generated;
  std::string control;
  std::optional<std::size_t> iters;
  std::optional<std::size_t> tables;
  std::optional<std::size_t> cap;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
};

inline void add_eval(CLI::App& app, EvalArgs& a) {
  app.add_option("--reference", a.reference, "Reference CSV with a header row");
  auto* v = app.add_option("--variant", a.variant, "Generator variant to sample");
  auto* g = app.add_option("--generated", a.generated, "Directory of generated episodes (manifest.jsonl)");
  auto* c = app.add_option("--control", a.control, "Control generator")->check(CLI::IsMember({"gaussian", "gaussian-ref", "replay"}));
  v->excludes(g)->excludes(c);
  g->excludes(c);
  app.add_option("--iters", a.iters, "Monte-Carlo iterations")->check(CLI::PositiveNumber);
  app.add_option("--tables", a.tables, "Tables per iteration")->check(CLI::PositiveNumber);
  app.add_option("--cap", a.cap, "Reservoir cap for marginal pools")->check(CLI::PositiveNumber);
  app.add_option("--seed", a.seed, "Protocol seed");
  app.add_option("--out", a.out, "Scores JSON (default: standard output)");
  app.add_option("--config", a.config, "Config JSON");
}

inline std::vector<Matrix<double>> load_generated_tables(const std::filesystem::path& dir) {
  std::vector<Matrix<double>> out;
  for (const auto& rec : io::read_manifest(dir / "manifest.jsonl")) {
    out.push_back(eval::episode_table(io::read_episode(dir / rec.path).episode));
  }
  return out;
}

inline int run_eval(EvalArgs a, Streams io_) {
  const auto cfg_json = load_config_json(a.config);
  if (a.reference.empty()) from_section(cfg_json, "eval", "reference", a.reference);
  if (a.reference.empty()) throw UsageError("--reference is required");
  if (a.variant.empty() && a.generated.empty() && a.control.empty()) {
    if (cfg_json.contains("variant")) {
      a.variant = cfg_json.at("variant").get<std::string>();
    } else {
      throw UsageError("one of --variant, --generated or --control is required");
    }
  }
  const auto ref = io::read_reference_table(a.reference);
  eval::EvalProtocol protocol;
  from_section(cfg_json, "eval", "iters", protocol.iterations);
  from_section(cfg_json, "eval", "tables", protocol.tables_per_iteration);
  from_section(cfg_json, "eval", "cap", protocol.pool_cap);
  from_section(cfg_json, "eval", "seed", protocol.seed);
  if (a.out.empty()) from_section(cfg_json, "eval", "out", a.out);
  if (a.iters) protocol.iterations = *a.iters;
  if (a.tables) protocol.tables_per_iteration = *a.tables;
  if (a.cap) protocol.pool_cap = *a.cap;
  if (a.seed) protocol.seed = *a.seed;
  if (!protocol.valid()) throw UsageError("iterations, tables and cap must be positive");
  eval::TableSource source;
  if (!a.variant.empty()) {
    source = eval::generator_source(resolve_variant(cfg_json, a.variant));
  } else if (!a.generated.empty()) {
    source = eval::fixed_source(load_generated_tables(a.generated));
  } else if (a.control == "gaussian") {
    // Schema law of the full generator (or the config's dims), no dependence.
    source = eval::gaussian_source(resolve_variant(cfg_json, "full").dims);
  } else if (a.control == "gaussian-ref") {
    source = eval::gaussian_source(ref.values.rows(), ref.values.cols());
  } else {
    source = eval::replay_source(ref.values);
  }
  io_.err << "evaluating " << protocol.iterations << " x " << protocol.tables_per_iteration << " tables\n";
  const auto scores = eval::evaluate_generator(source, ref.values, protocol);
  write_json(eval::to_json(scores, protocol), a.out, io_.out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct DescribeArgs {
  std::string episode;
  bool pca = false;
  std::string out;
};

inline void add_describe(CLI::App& app, DescribeArgs& a) {
  app.add_option("--episode", a.episode, "Episode file")->required();
  app.add_flag("--pca", a.pca, "Include a two-component PCA");
  app.add_option("--out", a.out, "Stats JSON (default: standard output)");
}

inline int run_describe(const DescribeArgs& a, Streams io_) {
  const auto f = io::read_episode(a.episode);
  write_json(eval::describe_episode(f, a.pca), a.out, io_.out);
  return kOk;
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
  std::string episode;
  std::string dir;
  std::string config;
};

inline void add_validate(CLI::App& app, ValidateArgs& a) {
  auto* e = app.add_option("--episode", a.episode, "Episode file");
  auto* d = app.add_option("--dir", a.dir, "Directory of episode files");
  e->excludes(d);
  app.add_option("--config", a.config, "Config JSON supplying QC thresholds");
}

/// Parses, shape-checks and re-runs QC on each file; stops at the first failure.
inline int run_validate(const ValidateArgs& a, Streams io_) {
  if (a.episode.empty() == a.dir.empty()) throw UsageError("exactly one of --episode or --dir is required");
  QcThresholds th;
  const auto cfg_json = load_config_json(a.config);
  if (cfg_json.contains("qc")) th = io::config_from_json(cfg_json).qc;
  std::vector<std::filesystem::path> files;
  if (!a.episode.empty()) {
    files.emplace_back(a.episode);
  } else {
    if (!std::filesystem::is_directory(a.dir)) throw IoError("'" + a.dir + "' is not a directory");
    for (const auto& entry : std::filesystem::directory_iterator(a.dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".opep") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  }
  for (const auto& p : files) {
    try {
      const auto f = io::read_episode(p);
      const auto v = check_episode(f.episode, th);
      if (!v.accepted) {
        io_.err << p.string() << ": qc rejected (" << to_string(v.reason) << ")\n";
        return kRuntime;
      }
    } catch (const std::exception& e) {
      io_.err << p.string() << ": " << e.what() << '\n';
      return kRuntime;
    }
  }
  io_.out << "validated " << files.size() << " file(s)\n";
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Synthetic tabular task generator and structural-alignment evaluator", "oprior"};
  app.require_subcommand(1);
  GenerateArgs ga;
  EvalArgs ea;
  DescribeArgs da;
  ValidateArgs va;
  auto* gen = app.add_subcommand("generate", "Generate episodes and a manifest");
  add_generate(*gen, ga);
  auto* ev = app.add_subcommand("eval", "Score a generator against a reference CSV");
  add_eval(*ev, ea);
  auto* de = app.add_subcommand("describe", "Summarize one episode file");
  add_describe(*de, da);
  auto* vl = app.add_subcommand("validate", "Check episode files");
  add_validate(*vl, va);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }
  Streams s{out, err};
  try {
    if (gen->parsed()) return run_generate(ga, s);
    if (ev->parsed()) return run_eval(ea, s);
    if (de->parsed()) return run_describe(da, s);
    if (vl->parsed()) return run_validate(va, s);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

inline int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}

}  // namespace oprior::cli
