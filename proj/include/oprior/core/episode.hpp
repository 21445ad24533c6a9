// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oprior/core/error.hpp"
#include "oprior/core/matrix.hpp"

namespace oprior {

inline constexpr std::size_t kMaxClasses = 16;

enum class TaskKind : std::uint8_t { regression, classification };

struct TaskDims {
  std::size_t rows = 0;          // T
  std::size_t features = 0;      // d
  std::size_t support_size = 0;  // n; rows [0, n) are the labeled support
  TaskKind task_kind = TaskKind::regression;
  std::size_t n_classes = 0;  // K, classification only

  bool operator==(const TaskDims&) const = default;
};

enum class SemanticType : std::uint8_t { continuous, count, ordinal, bounded, categorical_subgroup };
enum class Imputation : std::uint8_t { none, mean, median, constant, sampled, gaussian };
enum class Provenance : std::uint8_t { scm, engineered, spurious, subgroup };

struct ColumnMeta {
  SemanticType semantic_type = SemanticType::continuous;
  Imputation imputation = Imputation::none;
  Provenance provenance = Provenance::scm;
  std::size_t levels = 0;  // ordinal / subgroup level count, 0 otherwise

  bool operator==(const ColumnMeta&) const = default;
};

/// One complete in-context task.
struct Episode {
  TaskDims dims;
  Matrix<float> x;             // T x d
  std::vector<float> y;        // length T; class labels are exact small integers
  Matrix<std::uint8_t> mask;   // T x d, 1 = value was missing before imputation
  std::vector<ColumnMeta> col_meta;

  bool operator==(const Episode&) const = default;
};

/// Result of validate_episode_shape: empty violation means ok.
struct ShapeStatus {
  std::string violation;
  [[nodiscard]] bool ok() const { return violation.empty(); }
  explicit operator bool() const { return ok(); }
};

/// Checks every Episode invariant and names the first one violated.
inline ShapeStatus validate_episode_shape(const Episode& e) {
  const auto& d = e.dims;
  if (d.rows == 0) return {"dims: rows must be positive"};
  if (d.features == 0) return {"dims: features must be positive"};
  if (d.support_size < 1 || d.support_size >= d.rows) return {"dims: support size must satisfy 1 <= n < T"};
  if (d.task_kind == TaskKind::classification && (d.n_classes < 2 || d.n_classes > kMaxClasses)) {
    return {"dims: classification needs 2 <= K <= 16"};
  }
  if (e.x.rows() != d.rows || e.x.cols() != d.features) return {"feature shape"};
  if (e.y.size() != d.rows) return {"target length"};
  if (e.mask.rows() != d.rows || e.mask.cols() != d.features) return {"mask shape"};
  if (e.col_meta.size() != d.features) return {"column metadata count"};
  for (float v : e.x.data()) {
    if (!std::isfinite(v)) return {"non-finite feature value"};
  }
  for (float v : e.y) {
    if (!std::isfinite(v)) return {"non-finite target value"};
  }
  if (d.task_kind == TaskKind::classification) {
    for (float v : e.y) {
      if (v < 0.0f || v >= static_cast<float>(d.n_classes) || v != std::floor(v)) return {"label range"};
    }
  }
  return {};
}

inline std::string_view to_string(TaskKind k) {
  return k == TaskKind::classification ? "classification" : "regression";
}
inline std::string_view to_string(SemanticType t) {
  switch (t) {
    case SemanticType::continuous: return "continuous";
    case SemanticType::count: return "count";
    case SemanticType::ordinal: return "ordinal";
    case SemanticType::bounded: return "bounded";
    case SemanticType::categorical_subgroup: return "categorical-subgroup";
  }
  return "continuous";
}
inline std::string_view to_string(Imputation i) {
  switch (i) {
    case Imputation::none: return "none";
    case Imputation::mean: return "mean";
    case Imputation::median: return "median";
    case Imputation::constant: return "constant";
    case Imputation::sampled: return "sampled";
    case Imputation::gaussian: return "gaussian";
  }
  return "none";
}
inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::scm: return "scm";
    case Provenance::engineered: return "engineered";
    case Provenance::spurious: return "spurious";
    case Provenance::subgroup: return "subgroup";
  }
  return "scm";
}

template <class E>
E parse_enum(std::string_view s);

template <>
inline TaskKind parse_enum<TaskKind>(std::string_view s) {
  if (s == "classification") return TaskKind::classification;
  if (s == "regression") return TaskKind::regression;
  throw FormatError("unknown task kind '" + std::string(s) + "'");
}
template <>
inline SemanticType parse_enum<SemanticType>(std::string_view s) {
  for (auto t : {SemanticType::continuous, SemanticType::count, SemanticType::ordinal, SemanticType::bounded,
                 SemanticType::categorical_subgroup}) {
    if (to_string(t) == s) return t;
  }
  throw FormatError("unknown semantic type '" + std::string(s) + "'");
}
template <>
inline Imputation parse_enum<Imputation>(std::string_view s) {
  for (auto t : {Imputation::none, Imputation::mean, Imputation::median, Imputation::constant, Imputation::sampled,
                 Imputation::gaussian}) {
    if (to_string(t) == s) return t;
  }
  throw FormatError("unknown imputation '" + std::string(s) + "'");
}
template <>
inline Provenance parse_enum<Provenance>(std::string_view s) {
  for (auto t : {Provenance::scm, Provenance::engineered, Provenance::spurious, Provenance::subgroup}) {
    if (to_string(t) == s) return t;
  }
  throw FormatError("unknown provenance '" + std::string(s) + "'");
}

}  // namespace oprior
