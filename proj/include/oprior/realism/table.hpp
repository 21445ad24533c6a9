// SPDX-License-Identifier: Apache-2.0
//
// Column-major working state threaded through the realism and shift stages.
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "oprior/core/episode.hpp"
#include "oprior/core/matrix.hpp"

namespace oprior {

struct WorkingTable {
  ColumnTable x;                               // d columns of length T
  Column y;                                    // regression target or class labels
  Column latent;                               // classification score, empty for regression
  std::vector<std::vector<std::uint8_t>> mask; // one vector per column
  std::vector<ColumnMeta> meta;
  TaskDims dims;
  bool sequence_structured = false;

  [[nodiscard]] std::size_t rows() const { return y.size(); }
  [[nodiscard]] std::size_t support() const { return dims.support_size; }
  [[nodiscard]] std::size_t cols() const { return x.size(); }
  [[nodiscard]] bool classification() const { return dims.task_kind == TaskKind::classification; }

  void append_column(Column values, ColumnMeta m) {
    mask.emplace_back(values.size(), std::uint8_t{0});
    x.push_back(std::move(values));
    meta.push_back(m);
    dims.features = x.size();
  }

  bool operator==(const WorkingTable&) const = default;
};

/// Fresh table around raw SCM output; every column starts fully observed.
inline WorkingTable make_working_table(ColumnTable x, Column y, const TaskDims& dims, bool sequence) {
  WorkingTable t;
  t.dims = dims;
  t.dims.features = x.size();
  t.sequence_structured = sequence;
  t.mask.assign(x.size(), std::vector<std::uint8_t>(y.size(), 0));
  t.meta.assign(x.size(), ColumnMeta{});
  t.x = std::move(x);
  t.y = std::move(y);
  return t;
}

inline std::span<const double> support_of(const Column& c, std::size_t n) {
  return std::span<const double>(c).first(std::min(n, c.size()));
}

}  // namespace oprior
