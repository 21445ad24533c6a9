// SPDX-License-Identifier: Apache-2.0
//
// Binary episode files:
//   "OPEP" | u32 version | u32 header_json_len | header JSON |
//   X as f32 row-major | y as f32 | mask bits row-major (bit 0 = column 0,
//   each row padded to whole bytes). Little-endian throughout.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include <json.hpp>

#include "oprior/core/episode.hpp"
#include "oprior/core/error.hpp"
#include "oprior/qc.hpp"

namespace oprior::io {

inline constexpr std::string_view kMagic = "OPEP";
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::string_view kGeneratorVersion = "oprior 1.0.0";

struct EpisodeHeader {
  std::string variant = "custom";
  std::uint64_t master_seed = 0;
  std::uint64_t episode_index = 0;
  std::uint64_t batch_index = 0;
  std::size_t attempts = 1;
  QcVerdict qc;
  std::string generator_version = std::string(kGeneratorVersion);
  bool operator==(const EpisodeHeader&) const = default;
};

struct EpisodeFile {
  Episode episode;
  EpisodeHeader header;
  bool operator==(const EpisodeFile&) const = default;
};

inline nlohmann::json dims_to_json(const TaskDims& d) {
  return {{"rows", d.rows},
          {"features", d.features},
          {"support_size", d.support_size},
          {"task_kind", std::string(to_string(d.task_kind))},
          {"n_classes", d.n_classes}};
}

inline TaskDims dims_from_json(const nlohmann::json& j) {
  TaskDims d;
  d.rows = j.at("rows").get<std::size_t>();
  d.features = j.at("features").get<std::size_t>();
  d.support_size = j.at("support_size").get<std::size_t>();
  d.task_kind = parse_enum<TaskKind>(j.at("task_kind").get<std::string>());
  d.n_classes = j.at("n_classes").get<std::size_t>();
  return d;
}

inline nlohmann::json header_to_json(const Episode& e, const EpisodeHeader& h) {
  nlohmann::json meta = nlohmann::json::array();
  for (const auto& m : e.col_meta) {
    meta.push_back({{"semantic_type", std::string(to_string(m.semantic_type))},
                    {"imputation", std::string(to_string(m.imputation))},
                    {"provenance", std::string(to_string(m.provenance))},
                    {"levels", m.levels}});
  }
  return {{"dims", dims_to_json(e.dims)},
          {"variant", h.variant},
          {"master_seed", h.master_seed},
          {"episode_index", h.episode_index},
          {"batch_index", h.batch_index},
          {"attempts", h.attempts},
          {"col_meta", std::move(meta)},
          {"qc",
           {{"accepted", h.qc.accepted},
            {"reason", std::string(to_string(h.qc.reason))},
            {"active_feature_count", h.qc.active_feature_count}}},
          {"generator_version", h.generator_version}};
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

inline void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }
inline float get_f32(std::string_view in, std::size_t pos) { return std::bit_cast<float>(get_u32(in, pos)); }

}  // namespace detail

inline std::size_t mask_row_bytes(std::size_t cols) { return (cols + 7) / 8; }

inline std::string encode_episode(const Episode& e, const EpisodeHeader& h) {
  const auto status = validate_episode_shape(e);
  if (!status.ok()) throw FormatError("cannot encode invalid episode: " + status.violation);
  const std::string json = header_to_json(e, h).dump();
  const std::size_t rows = e.dims.rows;
  const std::size_t cols = e.dims.features;
  std::string out;
  out.reserve(12 + json.size() + 4 * rows * (cols + 1) + rows * mask_row_bytes(cols));
  out.append(kMagic);
  detail::put_u32(out, kFormatVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(json.size()));
  out.append(json);
  for (float v : e.x.data()) detail::put_f32(out, v);
  for (float v : e.y) detail::put_f32(out, v);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t b = 0; b < mask_row_bytes(cols); ++b) {
      unsigned char byte = 0;
      for (std::size_t k = 0; k < 8 && 8 * b + k < cols; ++k) {
        if (e.mask(r, 8 * b + k)) byte |= static_cast<unsigned char>(1U << k);
      }
      out.push_back(static_cast<char>(byte));
    }
  }
  return out;
}

inline EpisodeFile decode_episode(std::string_view in) {
  if (in.size() < 12) throw FormatError("truncated file header");
  if (in.substr(0, 4) != kMagic) throw FormatError("bad magic");
  const std::uint32_t version = detail::get_u32(in, 4);
  if (version != kFormatVersion) throw VersionError("unsupported format version " + std::to_string(version));
  const std::uint32_t json_len = detail::get_u32(in, 8);
  if (in.size() < 12 + static_cast<std::size_t>(json_len)) throw FormatError("truncated header JSON");
  EpisodeFile f;
  auto& e = f.episode;
  auto& h = f.header;
  try {
    const auto j = nlohmann::json::parse(in.substr(12, json_len));
    e.dims = dims_from_json(j.at("dims"));
    h.variant = j.at("variant").get<std::string>();
    h.master_seed = j.at("master_seed").get<std::uint64_t>();
    h.episode_index = j.at("episode_index").get<std::uint64_t>();
    h.batch_index = j.value("batch_index", std::uint64_t{0});
    h.attempts = j.at("attempts").get<std::size_t>();
    const auto& q = j.at("qc");
    h.qc.accepted = q.at("accepted").get<bool>();
    h.qc.reason = parse_enum<QcReason>(q.at("reason").get<std::string>());
    h.qc.active_feature_count = q.at("active_feature_count").get<std::size_t>();
    h.generator_version = j.at("generator_version").get<std::string>();
    for (const auto& m : j.at("col_meta")) {
      ColumnMeta c;
      c.semantic_type = parse_enum<SemanticType>(m.at("semantic_type").get<std::string>());
      c.imputation = parse_enum<Imputation>(m.at("imputation").get<std::string>());
      c.provenance = parse_enum<Provenance>(m.at("provenance").get<std::string>());
      c.levels = m.at("levels").get<std::size_t>();
      e.col_meta.push_back(c);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("bad header JSON: ") + ex.what());
  }
  const std::size_t rows = e.dims.rows;
  const std::size_t cols = e.dims.features;
  if (cols > 0 && rows > (std::size_t{1} << 40) / cols) throw FormatError("implausible dimensions");
  const std::size_t payload = 4 * rows * cols + 4 * rows + rows * mask_row_bytes(cols);
  const std::size_t pos0 = 12 + json_len;
  if (in.size() - pos0 < payload) throw FormatError("truncated payload");
  if (in.size() - pos0 > payload) throw FormatError("trailing bytes after payload");
  std::size_t pos = pos0;
  e.x = Matrix<float>(rows, cols);
  for (float& v : e.x.data()) {
    v = detail::get_f32(in, pos);
    pos += 4;
  }
  e.y.resize(rows);
  for (float& v : e.y) {
    v = detail::get_f32(in, pos);
    pos += 4;
  }
  e.mask = Matrix<std::uint8_t>(rows, cols, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t b = 0; b < mask_row_bytes(cols); ++b) {
      const auto byte = static_cast<unsigned char>(in[pos++]);
      for (std::size_t k = 0; k < 8 && 8 * b + k < cols; ++k) e.mask(r, 8 * b + k) = (byte >> k) & 1U;
    }
  }
  const auto status = validate_episode_shape(e);
  if (!status.ok()) throw FormatError("decoded episode is invalid: " + status.violation);
  return f;
}

inline void write_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_episode(const Episode& e, const EpisodeHeader& h, const std::filesystem::path& path) {
  write_bytes(path, encode_episode(e, h));
}

inline EpisodeFile read_episode(const std::filesystem::path& path) { return decode_episode(read_bytes(path)); }

}  // namespace oprior::io
