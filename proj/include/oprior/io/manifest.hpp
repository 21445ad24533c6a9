// SPDX-License-Identifier: Apache-2.0
//
// Line-oriented generation manifests (one JSON object per line).
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oprior/core/error.hpp"
#include "oprior/io/episode_file.hpp"

namespace oprior::io {

struct ManifestRecord {
  std::string path;  // relative to the manifest's directory
  std::uint64_t episode_index = 0;
  std::uint64_t seed = 0;
  std::uint64_t batch_index = 0;
  bool accepted = true;
  std::size_t attempts = 1;
  TaskDims dims;
  bool operator==(const ManifestRecord&) const = default;
};

inline nlohmann::json to_json(const ManifestRecord& r) {
  return {{"path", r.path},
          {"episode_index", r.episode_index},
          {"seed", r.seed},
          {"batch_index", r.batch_index},
          {"accepted", r.accepted},
          {"attempts", r.attempts},
          {"dims", dims_to_json(r.dims)}};
}

inline ManifestRecord manifest_record_from_json(const nlohmann::json& j) {
  ManifestRecord r;
  r.path = j.at("path").get<std::string>();
  r.episode_index = j.at("episode_index").get<std::uint64_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.batch_index = j.value("batch_index", std::uint64_t{0});
  r.accepted = j.at("accepted").get<bool>();
  r.attempts = j.at("attempts").get<std::size_t>();
  r.dims = dims_from_json(j.at("dims"));
  return r;
}

/// Appends lines and flushes after each one; indices must increase.
class ManifestWriter {
 public:
  explicit ManifestWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot open manifest '" + path.string() + "'");
  }
  void append(const nlohmann::json& line, std::uint64_t index) {
    if (has_last_ && index <= last_) throw IoError("manifest indices must be strictly increasing");
    has_last_ = true;
    last_ = index;
    out_ << line.dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("write failed for '" + path_.string() + "'");
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  bool has_last_ = false;
  std::uint64_t last_ = 0;
};

inline std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  std::vector<ManifestRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(manifest_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad manifest line: ") + e.what());
    }
    if (out.size() > 1 && out.back().episode_index <= out[out.size() - 2].episode_index) {
      throw FormatError("manifest indices are not strictly increasing");
    }
  }
  return out;
}

}  // namespace oprior::io
