// SPDX-License-Identifier: Apache-2.0
//
// Per-episode summary statistics for inspection and plotting.
#pragma once

#include <vector>

#include <json.hpp>

#include "oprior/core/episode.hpp"
#include "oprior/core/stats.hpp"
#include "oprior/eval/alignment.hpp"
#include "oprior/eval/spectrum.hpp"
#include "oprior/io/episode_file.hpp"

namespace oprior::eval {

inline nlohmann::json moments_json(const std::vector<double>& v) {
  if (v.empty()) return {{"count", 0}, {"mean", nullptr}, {"std", nullptr}};
  return {{"count", v.size()}, {"mean", stats::mean(v)}, {"std", v.size() > 1 ? stats::stddev(v) : 0.0}};
}

/// Dims, per-column support/query moments and missing rates, class
/// histograms, and optionally a two-component PCA of the whole table.
inline nlohmann::json describe_episode(const io::EpisodeFile& f, bool with_pca) {
  const Episode& e = f.episode;
  const std::size_t n = e.dims.support_size;
  const std::size_t rows = e.dims.rows;
  nlohmann::json columns = nlohmann::json::array();
  for (std::size_t c = 0; c < e.x.cols(); ++c) {
    std::vector<double> sup;
    std::vector<double> qry;
    std::size_t missing = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      (r < n ? sup : qry).push_back(static_cast<double>(e.x(r, c)));
      missing += e.mask(r, c);
    }
    const auto& m = e.col_meta[c];
    columns.push_back({{"index", c},
                       {"semantic_type", std::string(to_string(m.semantic_type))},
                       {"provenance", std::string(to_string(m.provenance))},
                       {"imputation", std::string(to_string(m.imputation))},
                       {"support", moments_json(sup)},
                       {"query", moments_json(qry)},
                       {"missing_rate", rows > 0 ? static_cast<double>(missing) / static_cast<double>(rows) : 0.0}});
  }
  nlohmann::json out = {{"dims", io::dims_to_json(e.dims)},
                        {"variant", f.header.variant},
                        {"episode_index", f.header.episode_index},
                        {"master_seed", f.header.master_seed},
                        {"columns", columns}};
  std::vector<double> ys(e.y.begin(), e.y.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<double> yq(e.y.begin() + static_cast<std::ptrdiff_t>(n), e.y.end());
  out["target"] = {{"support", moments_json(ys)}, {"query", moments_json(yq)}};
  if (e.dims.task_kind == TaskKind::classification) {
    std::vector<std::size_t> hs(e.dims.n_classes, 0);
    std::vector<std::size_t> hq(e.dims.n_classes, 0);
    for (std::size_t r = 0; r < rows; ++r) ++(r < n ? hs : hq)[static_cast<std::size_t>(e.y[r])];
    out["class_histogram"] = {{"support", hs}, {"query", hq}};
  }
  if (with_pca) {
    const auto pca = pca_project(episode_table(e), 2);
    nlohmann::json coords = nlohmann::json::array();
    for (std::size_t r = 0; r < pca.coordinates.rows(); ++r) {
      coords.push_back({pca.coordinates(r, 0), pca.coordinates.cols() > 1 ? pca.coordinates(r, 1) : 0.0});
    }
    out["pca"] = {{"explained_variance", pca.explained}, {"coordinates", coords}};
  }
  return out;
}

}  // namespace oprior::eval
