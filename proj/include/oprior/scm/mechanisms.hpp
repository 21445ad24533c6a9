// SPDX-License-Identifier: Apache-2.0
//
// The five base mechanism families and parent aggregation. Every mechanism
// maps a T x p_in input (columns) to a T x width output; roots get iid
// standard normal exogenous input.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oprior/core/error.hpp"
#include "oprior/core/matrix.hpp"
#include "oprior/core/rng.hpp"
#include "oprior/core/stats.hpp"
#include "oprior/scm/linalg.hpp"
#include "oprior/scm/tree.hpp"

namespace oprior::scm {

enum class Family : std::uint8_t { mlp, tree, conv1d, gp, var_lagged };
enum class Activation : std::uint8_t { tanh, relu, sin, identity };
enum class TreeKind : std::uint8_t { cart, extra, forest, direct_sampled };
enum class GpCombiner : std::uint8_t { linear, quadratic, mlp };
enum class Aggregation : std::uint8_t { mean, weighted_softmax, mlp, product, max };

inline constexpr std::size_t kFamilyCount = 5;
inline constexpr std::size_t kAggregationCount = 5;

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::mlp: return "mlp";
    case Family::tree: return "tree";
    case Family::conv1d: return "conv1d";
    case Family::gp: return "gp";
    case Family::var_lagged: return "var_lagged";
  }
  return "mlp";
}

inline std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::mean: return "mean";
    case Aggregation::weighted_softmax: return "weighted_softmax";
    case Aggregation::mlp: return "mlp";
    case Aggregation::product: return "product";
    case Aggregation::max: return "max";
  }
  return "mean";
}

struct MlpParams {
  std::vector<std::size_t> widths;   // one entry per layer; last = output width
  std::vector<double> noise_scale;   // per layer
  Activation activation = Activation::tanh;
  double weight_scale = 1.0;         // 0 gives all-zero weights and biases
  bool operator==(const MlpParams&) const = default;
};

struct TreeParams {
  TreeKind kind = TreeKind::cart;
  std::size_t max_depth = 3;
  std::size_t n_trees = 1;
  double noise_scale = 0.0;
  bool operator==(const TreeParams&) const = default;
};

struct ConvParams {
  std::size_t layers = 1;
  std::size_t kernel_size = 3;
  Activation activation = Activation::tanh;
  double noise_scale = 0.0;
  std::vector<double> fixed_kernel;  // if set, used by every layer with zero bias
  bool operator==(const ConvParams&) const = default;
};

struct GpParams {
  double lengthscale = 1.0;
  GpCombiner combiner = GpCombiner::linear;
  bool operator==(const GpParams&) const = default;
};

struct VarParams {
  std::size_t order = 1;
  double weight_scale = 1.0;
  bool tanh_nonlinearity = true;  // false: identity
  double noise_scale = 0.1;
  bool operator==(const VarParams&) const = default;
};

struct MechanismSpec {
  Family family = Family::mlp;
  std::size_t output_width = 1;
  std::size_t root_inputs = 4;  // exogenous columns synthesized for roots
  MlpParams mlp;
  TreeParams tree;
  ConvParams conv;
  GpParams gp;
  VarParams var;

  /// Empty string when all family invariants hold.
  [[nodiscard]] std::string invalid_reason() const {
    if (output_width < 1) return "output width must be >= 1";
    switch (family) {
      case Family::mlp:
        if (mlp.widths.empty()) return "mlp needs L >= 1";
        if (mlp.widths.back() != output_width) return "mlp last width must equal output width";
        if (mlp.noise_scale.size() != mlp.widths.size()) return "mlp noise per layer";
        break;
      case Family::tree:
        if (tree.max_depth < 1) return "tree max_depth must be >= 1";
        if (tree.n_trees < 1) return "tree count must be >= 1";
        break;
      case Family::conv1d:
        if (conv.kernel_size < 1 || conv.kernel_size % 2 == 0) return "conv kernel must be odd and >= 1";
        if (conv.layers < 1) return "conv needs >= 1 layer";
        if (!conv.fixed_kernel.empty() && conv.fixed_kernel.size() != conv.kernel_size) return "fixed kernel size";
        break;
      case Family::gp:
        if (!(gp.lengthscale > 0.0)) return "gp lengthscale must be positive";
        break;
      case Family::var_lagged:
        if (var.order < 1) return "var order must be >= 1";
        break;
    }
    return {};
  }
  bool operator==(const MechanismSpec&) const = default;
};

inline double activate(Activation a, double v) {
  switch (a) {
    case Activation::tanh: return std::tanh(v);
    case Activation::relu: return v > 0.0 ? v : 0.0;
    case Activation::sin: return std::sin(v);
    case Activation::identity: return v;
  }
  return v;
}

namespace detail {

inline ColumnTable exogenous_input(std::size_t rows, std::size_t cols, RngStream& rng) {
  ColumnTable in(cols, Column(rows));
  for (auto& c : in) {
    for (auto& v : c) v = rng.normal();
  }
  return in;
}

inline void standardize_in_place(ColumnTable& cols) {
  for (auto& c : cols) {
    const double m = stats::mean(c);
    const double s = stats::stddev(c);
    for (auto& v : c) v = s > 0.0 ? (v - m) / s : 0.0;
  }
}

/// One dense layer: out_j = act(sum_i W_ji in_i + b_j) + noise * eps.
inline ColumnTable dense_layer(const ColumnTable& in, std::size_t rows, std::size_t width, Activation act,
                               double weight_scale, double noise, RngStream& rng) {
  const double fan_in = static_cast<double>(std::max<std::size_t>(1, in.size()));
  const double sd = weight_scale / std::sqrt(fan_in);
  ColumnTable out(width, Column(rows, 0.0));
  for (auto& o : out) {
    const double bias = weight_scale * 0.5 * rng.normal();
    std::fill(o.begin(), o.end(), bias);
    for (const auto& col : in) linalg::axpy(sd * rng.normal(), col, o);
    for (auto& v : o) v = activate(act, v);
    if (noise > 0.0) {
      for (auto& v : o) v += noise * rng.normal();
    }
  }
  return out;
}

}  // namespace detail

inline ColumnTable eval_mlp(const MechanismSpec& spec, ColumnTable in, std::size_t rows, RngStream& rng) {
  for (std::size_t l = 0; l < spec.mlp.widths.size(); ++l) {
    in = detail::dense_layer(in, rows, spec.mlp.widths[l], spec.mlp.activation, spec.mlp.weight_scale,
                             spec.mlp.noise_scale[l], rng);
  }
  return in;
}

inline ColumnTable eval_conv1d(const MechanismSpec& spec, const ColumnTable& in, std::size_t rows, RngStream& rng) {
  const std::size_t width = spec.output_width;
  const std::size_t k = spec.conv.kernel_size;
  const auto half = static_cast<std::ptrdiff_t>(k / 2);
  // Tile the input along the feature axis to the output width.
  ColumnTable cur(width);
  for (std::size_t c = 0; c < width; ++c) cur[c] = in[c % in.size()];
  for (std::size_t layer = 0; layer < spec.conv.layers; ++layer) {
    std::vector<double> kernel = spec.conv.fixed_kernel;
    double bias = 0.0;
    if (kernel.empty()) {
      kernel.resize(k);
      for (auto& w : kernel) w = rng.normal() / std::sqrt(static_cast<double>(k));
      bias = 0.5 * rng.normal();
    }
    ColumnTable next(width, Column(rows, bias));
    for (std::size_t c = 0; c < width; ++c) {
      for (std::size_t o = 0; o < k; ++o) {
        const auto src = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(c + o) - half, 0,
                                                    static_cast<std::ptrdiff_t>(width) - 1);
        linalg::axpy(kernel[o], cur[static_cast<std::size_t>(src)], next[c]);
      }
      for (auto& v : next[c]) v = activate(spec.conv.activation, v);
      if (spec.conv.noise_scale > 0.0) {
        for (auto& v : next[c]) v += spec.conv.noise_scale * rng.normal();
      }
    }
    cur = std::move(next);
  }
  return cur;
}

inline ColumnTable eval_tree(const MechanismSpec& spec, ColumnTable in, std::size_t rows, RngStream& rng) {
  detail::standardize_in_place(in);
  const std::size_t p = in.size();
  const auto all_orders = tree::argsort_columns(in);
  ColumnTable out(spec.output_width);
  for (std::size_t c = 0; c < spec.output_width; ++c) {
    RngStream col_rng = rng.fork(c);
    // At most 8 input columns per output column.
    auto feats = col_rng.sample_without_replacement(p, std::min<std::size_t>(p, 8));
    std::sort(feats.begin(), feats.end());
    ColumnTable x;
    std::vector<std::vector<std::uint32_t>> orders;
    for (auto f : feats) {
      x.push_back(in[f]);
      orders.push_back(all_orders[f]);
    }
    // Smooth random pseudo-target.
    Column target(rows, 0.0);
    for (const auto& col : x) linalg::axpy(col_rng.normal() / std::sqrt(static_cast<double>(x.size())), col, target);
    const double amp = col_rng.uniform(0.5, 3.0);
    const bool use_sin = col_rng.bernoulli(0.5);
    for (auto& v : target) v = use_sin ? std::sin(amp * v) : std::tanh(amp * v);

    tree::TreeOptions opt;
    opt.max_depth = spec.tree.max_depth;
    std::size_t n_trees = spec.tree.n_trees;
    bool bootstrap = false;
    switch (spec.tree.kind) {
      case TreeKind::cart:
        opt.splitter = tree::Splitter::exhaustive;
        n_trees = 1;
        break;
      case TreeKind::extra:
        opt.splitter = tree::Splitter::random;
        break;
      case TreeKind::forest:
        opt.splitter = tree::Splitter::exhaustive;
        opt.max_features = std::max<std::size_t>(1, (x.size() + 2) / 3);
        bootstrap = true;
        break;
      case TreeKind::direct_sampled:
        opt.splitter = tree::Splitter::sampled;
        n_trees = 1;
        break;
    }
    Column pred(rows, 0.0);
    for (std::size_t t = 0; t < n_trees; ++t) {
      RngStream tree_rng = col_rng.fork(1000 + t);
      const auto weights = bootstrap ? tree::bootstrap_weights(rows, tree_rng) : std::vector<double>{};
      const auto fitted = tree::fit_tree(x, target, weights, orders, opt, tree_rng);
      const auto p_t = fitted.predict_all(x, rows);
      linalg::axpy(1.0 / static_cast<double>(n_trees), p_t, pred);
    }
    if (spec.tree.noise_scale > 0.0) {
      for (auto& v : pred) v += spec.tree.noise_scale * col_rng.normal();
    }
    out[c] = std::move(pred);
  }
  return out;
}

inline ColumnTable eval_gp(const MechanismSpec& spec, ColumnTable in, std::size_t rows, RngStream& rng) {
  detail::standardize_in_place(in);
  const double ell = spec.gp.lengthscale * std::sqrt(static_cast<double>(std::max<std::size_t>(1, in.size())));
  const auto kernel = linalg::rbf_kernel_matrix(in, rows, ell, 0.0);
  const auto chol = linalg::cholesky_with_jitter(kernel);
  if (!chol) throw NumericError("GP kernel not positive definite after jitter 1e-4");
  const std::size_t width = spec.output_width;
  const std::size_t gp_cols = width >= 2 ? width - 1 : 1;
  ColumnTable f(gp_cols);
  Column z(rows);
  for (auto& col : f) {
    for (auto& v : z) v = rng.normal();
    col = linalg::lower_times(chol->factor, z);
  }
  // Combined column built from the GP columns.
  Column combined(rows, 0.0);
  const std::size_t m = std::min<std::size_t>(gp_cols, 8);
  switch (spec.gp.combiner) {
    case GpCombiner::linear:
      for (std::size_t i = 0; i < gp_cols; ++i) {
        linalg::axpy(rng.normal() / std::sqrt(static_cast<double>(gp_cols)), f[i], combined);
      }
      break;
    case GpCombiner::quadratic:
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
          const double q = rng.normal() / static_cast<double>(m);
          for (std::size_t t = 0; t < rows; ++t) combined[t] += q * f[i][t] * f[j][t];
        }
      }
      break;
    case GpCombiner::mlp: {
      const auto hidden = detail::dense_layer(f, rows, 8, Activation::tanh, 1.0, 0.0, rng);
      for (const auto& h : hidden) linalg::axpy(rng.normal() / std::sqrt(8.0), h, combined);
      break;
    }
  }
  if (width < 2) return {combined};
  f.push_back(std::move(combined));
  return f;
}

inline ColumnTable eval_var(const MechanismSpec& spec, const ColumnTable& in, std::size_t rows, RngStream& rng) {
  const std::size_t width = spec.output_width;
  const std::size_t s = width >= 2 ? width - 1 : 1;
  const std::size_t p = spec.var.order;
  const double a_sd = spec.var.weight_scale / std::sqrt(static_cast<double>(s * p));
  // lag_weights[l][i][j]: effect of state j at lag l+1 on state i.
  std::vector<Matrix<double>> lag_weights(p, Matrix<double>(s, s));
  for (auto& a : lag_weights) {
    for (auto& v : a.data()) v = a_sd * rng.normal();
  }
  Matrix<double> input_weights(s, in.size());
  const double b_sd = spec.var.weight_scale / std::sqrt(static_cast<double>(std::max<std::size_t>(1, in.size())));
  for (auto& v : input_weights.data()) v = b_sd * rng.normal();

  ColumnTable state(s, Column(rows, 0.0));
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t i = 0; i < s; ++i) {
      double acc = 0.0;
      for (std::size_t l = 0; l < p && l < t; ++l) {
        const auto& a = lag_weights[l];
        for (std::size_t j = 0; j < s; ++j) acc += a(i, j) * state[j][t - l - 1];
      }
      for (std::size_t j = 0; j < in.size(); ++j) acc += input_weights(i, j) * in[j][t];
      const double v = spec.var.tanh_nonlinearity ? std::tanh(acc) : acc;
      state[i][t] = v + spec.var.noise_scale * rng.normal();
    }
  }
  if (width < 2) return state;
  Column projection(rows, 0.0);
  for (const auto& col : state) linalg::axpy(rng.normal() / std::sqrt(static_cast<double>(s)), col, projection);
  state.push_back(std::move(projection));
  return state;
}

/// Evaluates one mechanism. An empty `parent_input` marks a root, which
/// synthesizes iid standard normal exogenous columns.
inline ColumnTable eval_node(const MechanismSpec& spec, const ColumnTable& parent_input, std::size_t rows,
                             RngStream& rng) {
  if (const auto why = spec.invalid_reason(); !why.empty()) throw ConfigError("mechanism: " + why);
  ColumnTable in = parent_input;
  if (in.empty() && spec.family != Family::var_lagged) {
    in = detail::exogenous_input(rows, std::max<std::size_t>(1, spec.root_inputs), rng);
  }
  ColumnTable out;
  switch (spec.family) {
    case Family::mlp: out = eval_mlp(spec, std::move(in), rows, rng); break;
    case Family::tree: out = eval_tree(spec, std::move(in), rows, rng); break;
    case Family::conv1d: out = eval_conv1d(spec, in, rows, rng); break;
    case Family::gp: out = eval_gp(spec, std::move(in), rows, rng); break;
    case Family::var_lagged: out = eval_var(spec, in, rows, rng); break;
  }
  for (const auto& col : out) {
    for (double v : col) {
      if (!std::isfinite(v) || std::fabs(v) > 1e12) throw NumericError("mechanism output diverged");
    }
  }
  return out;
}

/// Convex combination with softmax(scores) weights.
inline Column softmax_combine(const std::vector<std::span<const double>>& parents, std::span<const double> scores) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  std::vector<double> w(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp(scores[i] - mx);
    total += w[i];
  }
  Column out(parents[0].size(), 0.0);
  for (std::size_t i = 0; i < parents.size(); ++i) linalg::axpy(w[i] / total, parents[i], out);
  return out;
}

/// Combines parent columns of equal length into one column.
inline Column aggregate_parents(const std::vector<std::span<const double>>& parents, Aggregation op, RngStream& rng) {
  if (parents.empty()) throw ConfigError("aggregation needs at least one parent");
  const std::size_t rows = parents[0].size();
  for (const auto& p : parents) {
    if (p.size() != rows) throw ConfigError("parent columns differ in length");
  }
  Column out(parents[0].begin(), parents[0].end());
  switch (op) {
    case Aggregation::mean:
      for (std::size_t i = 1; i < parents.size(); ++i) linalg::axpy(1.0, parents[i], out);
      if (parents.size() > 1) {
        for (auto& v : out) v /= static_cast<double>(parents.size());
      }
      break;
    case Aggregation::weighted_softmax: {
      std::vector<double> scores(parents.size());
      for (auto& s : scores) s = rng.normal();
      out = softmax_combine(parents, scores);
      break;
    }
    case Aggregation::mlp: {
      constexpr std::size_t hidden = 8;
      const double sd = 1.0 / std::sqrt(static_cast<double>(parents.size()));
      std::fill(out.begin(), out.end(), 0.0);
      Column h(rows);
      for (std::size_t j = 0; j < hidden; ++j) {
        std::fill(h.begin(), h.end(), 0.5 * rng.normal());
        for (const auto& p : parents) linalg::axpy(sd * rng.normal(), p, h);
        const double v = rng.normal() / std::sqrt(static_cast<double>(hidden));
        for (std::size_t t = 0; t < rows; ++t) out[t] += v * std::tanh(h[t]);
      }
      break;
    }
    case Aggregation::product:
      for (std::size_t i = 1; i < parents.size(); ++i) {
        for (std::size_t t = 0; t < rows; ++t) out[t] *= parents[i][t];
      }
      break;
    case Aggregation::max:
      for (std::size_t i = 1; i < parents.size(); ++i) {
        for (std::size_t t = 0; t < rows; ++t) out[t] = std::max(out[t], parents[i][t]);
      }
      break;
  }
  return out;
}

}  // namespace oprior::scm
