// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for unit and acceptance tests.
#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "oprior/pipeline.hpp"

namespace oprior::harness {

/// Overwrites every query cell (features, target, latent score, mask) with
/// large finite values unrelated to the episode.
inline void scramble_queries(WorkingTable& t, RngStream& noise) {
  for (std::size_t r = t.support(); r < t.rows(); ++r) {
    for (auto& c : t.x) c[r] = 1e3 * noise.normal() + (noise.bernoulli(0.5) ? 1e4 : -1e4);
    for (auto& m : t.mask) m[r] = noise.bernoulli(0.5) ? 1 : 0;
    t.y[r] = t.classification() ? static_cast<double>(noise.below(t.dims.n_classes)) : 1e5 * noise.normal();
    if (!t.latent.empty()) t.latent[r] = 1e5 * noise.normal();
  }
}

/// Runs every stage twice: on the raw table, and on a copy whose query rows
/// are scrambled before each stage. Returns an empty string when every fitted
/// plan and every support cell agree, otherwise a description.
inline std::string leakage_violation(const VariantConfig& cfg, std::uint64_t seed, std::uint64_t i,
                                     std::uint64_t s, std::size_t* stages_run = nullptr) {
  const auto ctx = prepare_episode(cfg, s, i, seed, 0);
  scm::HybridDag dag;
  WorkingTable a;
  try {
    a = sample_raw_table(cfg, ctx, &dag);
  } catch (const NumericError&) {
    return {};
  } catch (const SelectionError&) {
    return {};
  }
  WorkingTable b = a;
  RngStream noise(seed ^ 0x5eedULL, i);
  const auto sa = build_stages(cfg, ctx);
  const auto sb = build_stages(cfg, ctx);
  for (std::size_t k = 0; k < sa.size(); ++k) {
    scramble_queries(b, noise);
    StagePlan pa, pb;
    try {
      pa = sa[k].run(a);
    } catch (const Error&) {
      return {};  // the attempt would be resampled; nothing leaked
    }
    try {
      pb = sb[k].run(b);
    } catch (const Error& e) {
      return "stage " + sa[k].name + " failed only with scrambled queries: " + e.what();
    }
    if (!(pa == pb)) return "stage " + sa[k].name + " fitted a different plan";
    if (stages_run) ++*stages_run;
  }
  if (a.cols() != b.cols()) return "column counts differ";
  const std::size_t n = a.support();
  for (std::size_t j = 0; j < a.cols(); ++j) {
    for (std::size_t r = 0; r < n; ++r) {
      if (a.x[j][r] != b.x[j][r] || a.mask[j][r] != b.mask[j][r]) {
        return "support cell (" + std::to_string(r) + ", " + std::to_string(j) + ") differs";
      }
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    if (a.y[r] != b.y[r]) return "support target " + std::to_string(r) + " differs";
  }
  if (!a.latent.empty()) {
    for (std::size_t r = 0; r < n; ++r) {
      if (a.latent[r] != b.latent[r]) return "support latent score " + std::to_string(r) + " differs";
    }
  }
  if (!(a.meta == b.meta)) return "column metadata differs";
  return {};
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// True when both directories hold the same file names with identical bytes.
inline bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b, std::string* why = nullptr) {
  std::vector<std::string> na, nb;
  for (const auto& e : std::filesystem::directory_iterator(a)) na.push_back(e.path().filename().string());
  for (const auto& e : std::filesystem::directory_iterator(b)) nb.push_back(e.path().filename().string());
  std::sort(na.begin(), na.end());
  std::sort(nb.begin(), nb.end());
  if (na != nb) {
    if (why) *why = "file lists differ";
    return false;
  }
  for (const auto& n : na) {
    if (read_file(a / n) != read_file(b / n)) {
      if (why) *why = n + " differs";
      return false;
    }
  }
  return true;
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs the CLI with shell-quoted arguments, capturing both streams.
inline CommandResult run_cli(const std::string& cli, const std::vector<std::string>& args) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path();
  const auto tag = std::to_string(::getpid()) + "_" + std::to_string(counter++);
  const auto out = dir / ("oprior_cli_out_" + tag);
  const auto err = dir / ("oprior_cli_err_" + tag);
  std::string cmd = "'" + cli + "'";
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  CommandResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  std::filesystem::remove(out);
  std::filesystem::remove(err);
  return r;
}

}  // namespace oprior::harness
