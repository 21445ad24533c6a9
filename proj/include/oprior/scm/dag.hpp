// SPDX-License-Identifier: Apache-2.0
//
// Hybrid SCM: an ordered tuple of mechanisms where node j may read the
// outputs of any earlier node. Sampling, evaluation in topological order, and
// feature/target selection.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "oprior/core/episode.hpp"
#include "oprior/core/error.hpp"
#include "oprior/core/rng.hpp"
#include "oprior/scm/mechanisms.hpp"
#include "oprior/scm/selection.hpp"

namespace oprior::scm {

struct DagNode {
  MechanismSpec spec;
  Aggregation aggregation = Aggregation::mean;
  std::vector<std::size_t> parents;  // all strictly smaller than this node's index
  bool operator==(const DagNode&) const = default;
};

struct HybridDag {
  std::vector<DagNode> nodes;
  FeatureTargetSelection selection;

  [[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> e;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      for (auto i : nodes[j].parents) e.emplace_back(i, j);
    }
    return e;
  }
  [[nodiscard]] std::size_t total_width() const {
    std::size_t w = 0;
    for (const auto& n : nodes) w += n.spec.output_width;
    return w;
  }
  /// True when a lagged-VAR node makes row order meaningful as time.
  [[nodiscard]] bool sequence_structured() const {
    return std::any_of(nodes.begin(), nodes.end(),
                       [](const DagNode& n) { return n.spec.family == Family::var_lagged; });
  }
  bool operator==(const HybridDag&) const = default;
};

/// Structural sampling options; these are configuration, not profile values.
struct ScmOptions {
  bool hybrid = true;
  std::size_t nodes_min = 2;
  std::size_t nodes_max = 6;
  std::size_t width_min = 4;
  std::size_t width_max = 32;
  std::size_t parents_max = 3;
  std::array<double, kFamilyCount> family_weights{1.0, 1.0, 1.0, 1.0, 1.0};
  std::optional<Family> forced_family;
  std::optional<std::size_t> forced_nodes;
  bool operator==(const ScmOptions&) const = default;
};

inline MechanismSpec sample_mechanism(Family family, std::size_t width, RngStream& rng) {
  MechanismSpec s;
  s.family = family;
  s.output_width = width;
  s.root_inputs = static_cast<std::size_t>(rng.integer(2, 8));
  auto activation = [&] { return static_cast<Activation>(rng.below(4)); };
  auto log_uniform = [&](double lo, double hi) { return std::exp(rng.uniform(std::log(lo), std::log(hi))); };
  switch (family) {
    case Family::mlp: {
      const auto layers = static_cast<std::size_t>(rng.integer(1, 3));
      for (std::size_t l = 0; l + 1 < layers; ++l) s.mlp.widths.push_back(static_cast<std::size_t>(rng.integer(4, 32)));
      s.mlp.widths.push_back(width);
      for (std::size_t l = 0; l < layers; ++l) s.mlp.noise_scale.push_back(log_uniform(1e-3, 0.3));
      s.mlp.activation = activation();
      break;
    }
    case Family::tree:
      s.tree.kind = static_cast<TreeKind>(rng.below(4));
      s.tree.max_depth = static_cast<std::size_t>(rng.integer(2, 5));
      s.tree.n_trees = static_cast<std::size_t>(rng.integer(1, 4));
      s.tree.noise_scale = rng.uniform(0.0, 0.1);
      break;
    case Family::conv1d:
      s.conv.layers = static_cast<std::size_t>(rng.integer(1, 3));
      s.conv.kernel_size = 2 * static_cast<std::size_t>(rng.integer(0, 3)) + 1;
      s.conv.activation = activation();
      s.conv.noise_scale = log_uniform(1e-3, 0.3);
      break;
    case Family::gp:
      s.gp.lengthscale = log_uniform(0.3, 3.0);
      s.gp.combiner = static_cast<GpCombiner>(rng.below(3));
      s.root_inputs = static_cast<std::size_t>(rng.integer(1, 4));
      break;
    case Family::var_lagged:
      s.var.order = static_cast<std::size_t>(rng.integer(1, 3));
      s.var.tanh_nonlinearity = rng.bernoulli(0.75);
      s.var.weight_scale = s.var.tanh_nonlinearity ? rng.uniform(0.5, 1.5) : rng.uniform(0.3, 0.8);
      s.var.noise_scale = rng.uniform(0.1, 0.5);
      break;
  }
  return s;
}

/// Samples a valid DAG whose pooled output width exceeds dims.features.
/// With hybrid disabled the DAG is a single node of one sampled family.
inline HybridDag sample_hybrid_dag(const TaskDims& dims, const ScmOptions& opt, RngStream& rng) {
  std::size_t n_nodes = 1;
  if (opt.forced_nodes) {
    n_nodes = std::max<std::size_t>(1, *opt.forced_nodes);
  } else if (opt.hybrid) {
    n_nodes = static_cast<std::size_t>(
        rng.integer(static_cast<std::int64_t>(opt.nodes_min), static_cast<std::int64_t>(opt.nodes_max)));
  }
  HybridDag dag;
  std::vector<std::size_t> widths(n_nodes);
  std::vector<Family> families(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    families[i] = opt.forced_family ? *opt.forced_family : static_cast<Family>(rng.categorical(opt.family_weights));
    widths[i] = static_cast<std::size_t>(
        rng.integer(static_cast<std::int64_t>(opt.width_min), static_cast<std::int64_t>(opt.width_max)));
  }
  std::size_t total = 0;
  for (auto w : widths) total += w;
  if (total < dims.features + 1) widths.back() += dims.features + 1 - total;

  for (std::size_t i = 0; i < n_nodes; ++i) {
    DagNode node;
    node.spec = sample_mechanism(families[i], widths[i], rng);
    node.aggregation = static_cast<Aggregation>(rng.below(kAggregationCount));
    if (i > 0) {
      const auto k = static_cast<std::size_t>(rng.integer(1, static_cast<std::int64_t>(std::min(opt.parents_max, i))));
      node.parents = rng.sample_without_replacement(i, k);
      std::sort(node.parents.begin(), node.parents.end());
    }
    dag.nodes.push_back(std::move(node));
  }
  dag.selection.strategy = static_cast<SelectionStrategy>(rng.below(4));
  return dag;
}

/// Node input: column c aggregates column (c mod width) of every parent.
inline ColumnTable assemble_parent_input(const HybridDag& dag, std::size_t node,
                                         const std::vector<ColumnTable>& outputs, RngStream& rng) {
  const auto& parents = dag.nodes[node].parents;
  if (parents.empty()) return {};
  std::size_t p_in = 0;
  for (auto p : parents) p_in = std::max(p_in, outputs[p].size());
  ColumnTable in(p_in);
  for (std::size_t c = 0; c < p_in; ++c) {
    std::vector<std::span<const double>> cols;
    for (auto p : parents) cols.emplace_back(outputs[p][c % outputs[p].size()]);
    RngStream col_rng = rng.fork(c);
    in[c] = aggregate_parents(cols, dag.nodes[node].aggregation, col_rng);
  }
  return in;
}

struct RawTask {
  ColumnTable x;  // d columns of length T
  Column y;
  FeatureTargetSelection selection;
  bool sequence_structured = false;
};

/// Evaluates every node once in index (= topological) order, then selects
/// features and target. A pre-resolved selection in `dag` is used as-is.
inline RawTask generate_raw_task(const HybridDag& dag, const TaskDims& dims, RngStream& rng) {
  const std::size_t rows = dims.rows;
  std::vector<ColumnTable> outputs(dag.nodes.size());
  ColumnTable pooled;
  std::vector<std::size_t> node_of_column;
  for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
    for (auto p : dag.nodes[i].parents) {
      if (p >= i) throw ConfigError("DAG edge does not respect node order");
    }
    RngStream agg_rng = rng.fork(0x10000 + i);
    RngStream node_rng = rng.fork(i);
    const auto in = assemble_parent_input(dag, i, outputs, agg_rng);
    outputs[i] = eval_node(dag.nodes[i].spec, in, rows, node_rng);
    for (const auto& col : outputs[i]) {
      pooled.push_back(col);
      node_of_column.push_back(i);
    }
  }
  RawTask task;
  task.sequence_structured = dag.sequence_structured();
  if (dag.selection.resolved()) {
    task.selection = dag.selection;
  } else {
    RngStream sel_rng = rng.fork(0x20000);
    task.selection = select_columns(pooled, node_of_column, dag.selection.strategy, dims.features, sel_rng);
  }
  for (auto c : task.selection.feature_columns) {
    if (c >= pooled.size()) throw SelectionError("selected column out of range");
    task.x.push_back(pooled[c]);
  }
  if (task.selection.target_column >= pooled.size()) throw SelectionError("target column out of range");
  task.y = pooled[task.selection.target_column];
  return task;
}

}  // namespace oprior::scm
