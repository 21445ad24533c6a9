// SPDX-License-Identifier: Apache-2.0
//
// Minimal validity checks on a finished episode.
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "oprior/core/episode.hpp"
#include "oprior/core/error.hpp"
#include "oprior/core/stats.hpp"

namespace oprior {

struct QcThresholds {
  std::size_t min_active_features = 2;
  double near_constant_std = 1e-6;
  std::size_t min_class_count = 2;
  double min_target_std = 1e-3;
  std::size_t max_resamples = 20;

  [[nodiscard]] bool valid() const {
    return min_active_features > 0 && near_constant_std > 0.0 && min_class_count > 0 && min_target_std > 0.0 &&
           max_resamples > 0;
  }
  bool operator==(const QcThresholds&) const = default;
};

enum class QcReason : std::uint8_t { ok, too_few_active_features, collapsed_classes, degenerate_target, numeric_failure };

inline std::string_view to_string(QcReason r) {
  switch (r) {
    case QcReason::ok: return "ok";
    case QcReason::too_few_active_features: return "too_few_active_features";
    case QcReason::collapsed_classes: return "collapsed_classes";
    case QcReason::degenerate_target: return "degenerate_target";
    case QcReason::numeric_failure: return "numeric_failure";
  }
  return "ok";
}

template <>
inline QcReason parse_enum<QcReason>(std::string_view s) {
  for (auto r : {QcReason::ok, QcReason::too_few_active_features, QcReason::collapsed_classes,
                 QcReason::degenerate_target, QcReason::numeric_failure}) {
    if (to_string(r) == s) return r;
  }
  throw FormatError("unknown qc reason '" + std::string(s) + "'");
}

struct QcVerdict {
  bool accepted = true;
  QcReason reason = QcReason::ok;
  std::size_t active_feature_count = 0;

  static QcVerdict reject(QcReason r, std::size_t active = 0) { return {false, r, active}; }
  bool operator==(const QcVerdict&) const = default;
};

/// Columns whose support standard deviation exceeds the threshold.
inline std::size_t active_feature_count(const Episode& e, double near_constant_std) {
  const std::size_t n = e.dims.support_size;
  std::size_t active = 0;
  std::vector<double> col(n);
  for (std::size_t j = 0; j < e.x.cols(); ++j) {
    for (std::size_t t = 0; t < n; ++t) col[t] = e.x(t, j);
    if (n > 1 && stats::stddev(col) > near_constant_std) ++active;
  }
  return active;
}

inline QcVerdict check_episode(const Episode& e, const QcThresholds& th) {
  if (!validate_episode_shape(e).ok()) return QcVerdict::reject(QcReason::numeric_failure);
  const std::size_t active = active_feature_count(e, th.near_constant_std);
  if (active < th.min_active_features) return QcVerdict::reject(QcReason::too_few_active_features, active);
  const std::size_t n = e.dims.support_size;
  if (e.dims.task_kind == TaskKind::classification) {
    std::vector<std::size_t> counts(e.dims.n_classes, 0);
    for (std::size_t t = 0; t < n; ++t) ++counts[static_cast<std::size_t>(e.y[t])];
    for (auto c : counts) {
      if (c < th.min_class_count) return QcVerdict::reject(QcReason::collapsed_classes, active);
    }
  } else {
    std::vector<double> y(e.y.begin(), e.y.begin() + static_cast<std::ptrdiff_t>(n));
    if (n < 2 || stats::stddev(y) < th.min_target_std) return QcVerdict::reject(QcReason::degenerate_target, active);
  }
  return {true, QcReason::ok, active};
}

}  // namespace oprior
