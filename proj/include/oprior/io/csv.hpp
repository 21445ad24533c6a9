// SPDX-License-Identifier: Apache-2.0
//
// Reference tables from CSV with a header row. Quoted fields follow the
// usual doubled-quote convention.
#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "oprior/core/error.hpp"
#include "oprior/core/matrix.hpp"
#include "oprior/io/episode_file.hpp"

namespace oprior::io {

struct ReferenceTable {
  std::vector<std::string> names;
  Matrix<double> values;  // NaN marks an empty cell
};

inline std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field.push_back(ch);
      any = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline bool parse_number(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

/// Numeric columns parse as numbers; any other column is coded 0, 1, ... in
/// order of first appearance. Empty cells become NaN.
inline ReferenceTable parse_reference_csv(std::string_view text) {
  auto records = parse_csv_records(text);
  if (records.empty()) throw FormatError("CSV has no header row");
  ReferenceTable t;
  t.names = std::move(records.front());
  const std::size_t cols = t.names.size();
  if (cols == 0) throw FormatError("CSV header is empty");
  const std::size_t rows = records.size() - 1;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != cols) {
      throw FormatError("CSV row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                        " fields, expected " + std::to_string(cols));
    }
  }
  t.values = Matrix<double>(rows, cols, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < cols; ++c) {
    bool numeric = true;
    for (std::size_t r = 0; r < rows && numeric; ++r) {
      const auto cell = trim(records[r + 1][c]);
      double v = 0.0;
      if (!cell.empty() && !parse_number(cell, v)) numeric = false;
    }
    std::map<std::string, double> codes;
    for (std::size_t r = 0; r < rows; ++r) {
      const auto cell = trim(records[r + 1][c]);
      if (cell.empty()) continue;
      if (numeric) {
        parse_number(cell, t.values(r, c));
      } else {
        const auto [it, inserted] = codes.emplace(std::string(cell), static_cast<double>(codes.size()));
        t.values(r, c) = it->second;
      }
    }
  }
  return t;
}

inline ReferenceTable read_reference_table(const std::filesystem::path& path) {
  return parse_reference_csv(read_bytes(path));
}

}  // namespace oprior::io
