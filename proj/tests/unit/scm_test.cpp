// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <set>

#include "oprior/core/stats.hpp"
#include "oprior/scm/dag.hpp"
#include "oprior/scm/linalg.hpp"

namespace oprior::scm {
namespace {

using Spans = std::vector<std::span<const double>>;

TEST(Aggregate, MeanOfTwoParents) {
  const Column a{1, 1, 1}, b{3, 3, 3};
  RngStream rng(1, 1);
  EXPECT_EQ(aggregate_parents(Spans{a, b}, Aggregation::mean, rng), (Column{2, 2, 2}));
}

TEST(Aggregate, MaxElementwise) {
  const Column a{1, 5}, b{4, 2};
  RngStream rng(1, 1);
  EXPECT_EQ(aggregate_parents(Spans{a, b}, Aggregation::max, rng), (Column{4, 5}));
}

TEST(Aggregate, SoftmaxOfEqualScoresIsMean) {
  const Column a{1, 2, 9}, b{3, 0, 1}, c{2, 7, 5};
  const std::vector<double> scores{0.3, 0.3, 0.3};
  const auto out = softmax_combine(Spans{a, b, c}, scores);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(out[t], (a[t] + b[t] + c[t]) / 3.0, 1e-14);
}

TEST(Aggregate, SingleParentMeanAndMaxAreIdentity) {
  const Column a{1.5, -2, 3};
  RngStream rng(1, 1);
  EXPECT_EQ(aggregate_parents(Spans{a}, Aggregation::mean, rng), a);
  EXPECT_EQ(aggregate_parents(Spans{a}, Aggregation::max, rng), a);
}

TEST(Aggregate, ConvexOperatorsStayWithinParentRange) {
  RngStream data(3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + data.below(4);
    std::vector<Column> cols(k, Column(40));
    for (auto& c : cols)
      for (auto& v : c) v = data.normal();
    Spans spans(cols.begin(), cols.end());
    for (auto op : {Aggregation::mean, Aggregation::weighted_softmax, Aggregation::max}) {
      RngStream rng = data.fork(static_cast<std::uint64_t>(trial));
      const auto out = aggregate_parents(spans, op, rng);
      for (std::size_t t = 0; t < 40; ++t) {
        double lo = cols[0][t], hi = cols[0][t];
        for (const auto& c : cols) {
          lo = std::min(lo, c[t]);
          hi = std::max(hi, c[t]);
        }
        EXPECT_GE(out[t], lo - 1e-12);
        EXPECT_LE(out[t], hi + 1e-12);
      }
    }
  }
}

TEST(Aggregate, RejectsEmptyOrRagged) {
  RngStream rng(1, 1);
  EXPECT_THROW(aggregate_parents(Spans{}, Aggregation::mean, rng), ConfigError);
  const Column a{1, 2}, b{1};
  EXPECT_THROW(aggregate_parents(Spans{a, b}, Aggregation::mean, rng), ConfigError);
}

TEST(Mechanism, ZeroWeightMlpIsZero) {
  MechanismSpec s;
  s.family = Family::mlp;
  s.output_width = 5;
  s.mlp.widths = {7, 5};
  s.mlp.noise_scale = {0.0, 0.0};
  s.mlp.weight_scale = 0.0;
  s.mlp.activation = Activation::tanh;
  RngStream rng(4, 4);
  const auto out = eval_node(s, {}, 32, rng);
  ASSERT_EQ(out.size(), 5u);
  for (const auto& c : out)
    for (double v : c) EXPECT_EQ(v, 0.0);
}

TEST(Mechanism, AveragingConvKeepsConstant) {
  MechanismSpec s;
  s.family = Family::conv1d;
  s.output_width = 6;
  s.conv.kernel_size = 5;
  s.conv.layers = 2;
  s.conv.activation = Activation::identity;
  s.conv.noise_scale = 0.0;
  s.conv.fixed_kernel.assign(5, 1.0 / 5.0);
  const ColumnTable in{Column(20, 2.75), Column(20, 2.75)};
  RngStream rng(5, 5);
  const auto out = eval_node(s, in, 20, rng);
  ASSERT_EQ(out.size(), 6u);
  for (const auto& c : out)
    for (double v : c) EXPECT_NEAR(v, 2.75, 1e-14);
}

TEST(Mechanism, RbfAtOneLengthscale) {
  EXPECT_NEAR(linalg::rbf(1.7 * 1.7, 1.7), 0.60653065971263342, 1e-15);
  const ColumnTable pts{Column{0.0, 1.7}};
  const auto k = linalg::rbf_kernel_matrix(pts, 2, 1.7, 1e-6);
  EXPECT_NEAR(k(0, 1), std::exp(-0.5), 1e-15);
  EXPECT_EQ(k(0, 0), 1.0 + 1e-6);
}

TEST(Mechanism, GpJitterLadderSucceedsOnSampledKernels) {
  RngStream rng(6, 6);
  int ok = 0;
  constexpr int kTrials = 100;
  for (int trial = 0; trial < kTrials; ++trial) {
    const auto rows = static_cast<std::size_t>(rng.integer(64, 1024));
    const auto dim = static_cast<std::size_t>(rng.integer(1, 4));
    const double ell = std::exp(rng.uniform(std::log(0.3), std::log(3.0))) * std::sqrt(static_cast<double>(dim));
    ColumnTable in(dim, Column(rows));
    for (auto& c : in)
      for (auto& v : c) v = rng.normal();
    const auto chol = linalg::cholesky_with_jitter(linalg::rbf_kernel_matrix(in, rows, ell, 0.0));
    if (chol) {
      ++ok;
      EXPECT_LE(chol->jitter, 1e-4 * 1.0000001);
    }
  }
  EXPECT_GE(ok, 99);
}

TEST(Mechanism, CholeskyDiagonalCarriesJitter) {
  Matrix<double> k(3, 3, 1.0);  // rank one, needs jitter
  const auto chol = linalg::cholesky_with_jitter(k);
  ASSERT_TRUE(chol.has_value());
  EXPECT_GT(chol->jitter, 0.0);
  // L L^T reproduces the jittered kernel.
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= i; ++j) s += chol->factor(i, j) * chol->factor(i, j);
    EXPECT_NEAR(s, 1.0 + chol->jitter, 1e-12);
  }
}

TEST(Mechanism, ZeroWeightVarIsWhiteNoise) {
  MechanismSpec s;
  s.family = Family::var_lagged;
  s.output_width = 1;
  s.var.order = 1;
  s.var.weight_scale = 0.0;
  s.var.noise_scale = 1.0;
  RngStream rng(7, 7);
  const auto out = eval_node(s, {}, 2000, rng);
  ASSERT_EQ(out.size(), 1u);
  const std::span<const double> x(out[0]);
  EXPECT_LT(std::fabs(stats::pearson(x.first(1999), x.subspan(1))), 0.1);
  EXPECT_NEAR(stats::stddev(x), 1.0, 0.05);
}

TEST(Mechanism, InvalidSpecIsConfigError) {
  MechanismSpec s;
  s.family = Family::conv1d;
  s.conv.kernel_size = 4;
  RngStream rng(1, 1);
  EXPECT_THROW(eval_node(s, {}, 8, rng), ConfigError);
}

TEST(Mechanism, EveryFamilyIsFiniteAndShaped) {
  for (std::size_t f = 0; f < kFamilyCount; ++f) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      RngStream rng(seed, f);
      const auto spec = sample_mechanism(static_cast<Family>(f), 9, rng);
      ASSERT_TRUE(spec.invalid_reason().empty());
      const auto out = eval_node(spec, {}, 96, rng);
      ASSERT_EQ(out.size(), 9u);
      for (const auto& c : out) {
        ASSERT_EQ(c.size(), 96u);
        for (double v : c) ASSERT_TRUE(std::isfinite(v));
      }
    }
  }
}

// Brute-force best single split by weighted squared error.
double best_split_sse(const Column& x, const Column& y) {
  double best = std::numeric_limits<double>::infinity();
  for (double thr : x) {
    double sl = 0, sr = 0, nl = 0, nr = 0;
    for (std::size_t i = 0; i < x.size(); ++i) (x[i] <= thr ? (sl += y[i], nl += 1) : (sr += y[i], nr += 1));
    if (nl == 0 || nr == 0) continue;
    double sse = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double m = x[i] <= thr ? sl / nl : sr / nr;
      sse += (y[i] - m) * (y[i] - m);
    }
    best = std::min(best, sse);
  }
  return best;
}

TEST(Tree, DepthOneCartReproducesStep) {
  RngStream rng(8, 8);
  Column x(64), y(64);
  for (std::size_t i = 0; i < 64; ++i) {
    x[i] = rng.normal();
    y[i] = x[i] > 0.0 ? 1.0 : 0.0;
  }
  const ColumnTable xs{x};
  tree::TreeOptions opt;
  opt.max_depth = 1;
  const auto t = tree::fit_tree(xs, y, {}, tree::argsort_columns(xs), opt, rng);
  EXPECT_EQ(t.depth(), 1u);
  double sse = 0.0;
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_EQ(t.predict(xs, i), y[i]);
    sse += (t.predict(xs, i) - y[i]) * (t.predict(xs, i) - y[i]);
  }
  EXPECT_EQ(sse, best_split_sse(x, y));
}

TEST(Tree, CartMatchesBruteForceSplitOnNoisyTarget) {
  RngStream rng(9, 9);
  for (int trial = 0; trial < 20; ++trial) {
    Column x(48), y(48);
    for (std::size_t i = 0; i < 48; ++i) {
      x[i] = rng.normal();
      y[i] = std::sin(2.0 * x[i]) + 0.3 * rng.normal();
    }
    const ColumnTable xs{x};
    tree::TreeOptions opt;
    opt.max_depth = 1;
    const auto t = tree::fit_tree(xs, y, {}, tree::argsort_columns(xs), opt, rng);
    double sse = 0.0;
    for (std::size_t i = 0; i < 48; ++i) sse += (t.predict(xs, i) - y[i]) * (t.predict(xs, i) - y[i]);
    EXPECT_NEAR(sse, best_split_sse(x, y), 1e-9);
  }
}

TEST(Selection, FarthestPointIsForced) {
  const ColumnTable pts{Column{0.0}, Column{0.1}, Column{10.0}};
  EXPECT_EQ(farthest_point_order(pts, 0, 2), (std::vector<std::size_t>{0, 2}));
}

TEST(Selection, KMeansPicksOnePerCluster) {
  RngStream rng(10, 10);
  ColumnTable pts;
  for (int i = 0; i < 6; ++i) pts.push_back(Column{rng.normal(0, 0.1), rng.normal(0, 0.1)});
  for (int i = 0; i < 6; ++i) pts.push_back(Column{rng.normal(20, 0.1), rng.normal(20, 0.1)});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream r(seed, 11);
    const auto picked = kmeans_select(pts, 2, r);
    ASSERT_EQ(picked.size(), 2u);
    EXPECT_NE(picked[0] < 6, picked[1] < 6);
  }
}

// Independent brute-force k-th neighbour distances.
double kl_entropy_oracle(const Column& s, std::size_t k) {
  const std::size_t n = s.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) d.push_back(std::fabs(s[i] - s[j]));
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
    sum += std::log(std::max(d[k - 1], 1e-12));
  }
  return stats::digamma(static_cast<double>(n)) - stats::digamma(static_cast<double>(k)) + std::log(2.0) +
         sum / static_cast<double>(n);
}

TEST(Selection, KnnEntropyRanksWideAboveNarrow) {
  RngStream rng(12, 12);
  Column wide(500), narrow(500);
  for (auto& v : wide) v = rng.uniform(0, 10);
  for (auto& v : narrow) v = rng.uniform(0, 0.1);
  const double hw = knn_entropy(wide, 3), hn = knn_entropy(narrow, 3);
  EXPECT_GT(hw, hn);
  EXPECT_NEAR(hw, kl_entropy_oracle(wide, 3), 1e-9);
  EXPECT_NEAR(hn, kl_entropy_oracle(narrow, 3), 1e-9);
  EXPECT_NEAR(hw, std::log(10.0), 0.15);
}

TEST(Selection, TooFewColumnsIsSelectionError) {
  const ColumnTable cols(3, Column(10, 1.0));
  RngStream rng(1, 1);
  EXPECT_THROW(select_columns(cols, {}, SelectionStrategy::kmeans, 3, rng), SelectionError);
}

TEST(Selection, DistinctFeaturesAndTargetForEveryStrategy) {
  RngStream data(13, 13);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t total = 6 + data.below(40);
    const std::size_t d = 1 + data.below(total - 1);
    const std::size_t rows = 50 + data.below(400);
    ColumnTable cols(total, Column(rows));
    std::vector<std::size_t> node_of(total);
    for (std::size_t c = 0; c < total; ++c) {
      node_of[c] = c / 5;
      for (auto& v : cols[c]) v = data.normal();
    }
    for (std::size_t s = 0; s < 4; ++s) {
      RngStream rng = data.fork(static_cast<std::uint64_t>(trial * 4 + static_cast<int>(s)));
      const auto sel = select_columns(cols, node_of, static_cast<SelectionStrategy>(s), d, rng);
      ASSERT_EQ(sel.feature_columns.size(), d);
      std::set<std::size_t> uniq(sel.feature_columns.begin(), sel.feature_columns.end());
      EXPECT_EQ(uniq.size(), d);
      EXPECT_FALSE(uniq.count(sel.target_column));
      EXPECT_LT(sel.target_column, total);
    }
  }
}

TEST(Selection, CommunityPicksOneRepresentativePerCommunityFirst) {
  // Two blocks of near-identical columns; the first two picks span both.
  RngStream rng(14, 14);
  Column base_a(100), base_b(100);
  for (auto& v : base_a) v = rng.normal();
  for (auto& v : base_b) v = rng.normal();
  ColumnTable pts;
  for (int i = 0; i < 12; ++i) {
    Column c = i < 6 ? base_a : base_b;
    for (auto& v : c) v += 0.05 * rng.normal();
    pts.push_back(c);
  }
  const auto adj = knn_cosine_graph(pts, 5);
  const auto labels = louvain(adj, 1.0, rng);
  std::set<std::size_t> comms(labels.begin(), labels.end());
  EXPECT_GE(comms.size(), 2u);
  const auto picked = community_select(adj, labels, 2);
  ASSERT_EQ(picked.size(), 2u);
  EXPECT_NE(labels[picked[0]], labels[picked[1]]);
}

bool acyclic_by_kahn(const HybridDag& dag) {
  const std::size_t n = dag.nodes.size();
  std::vector<std::size_t> indeg(n, 0);
  std::vector<std::vector<std::size_t>> out(n);
  for (auto [i, j] : dag.edges()) {
    out[i].push_back(j);
    ++indeg[j];
  }
  std::deque<std::size_t> q;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) q.push_back(i);
  std::size_t seen = 0;
  while (!q.empty()) {
    const auto v = q.front();
    q.pop_front();
    ++seen;
    for (auto w : out[v])
      if (--indeg[w] == 0) q.push_back(w);
  }
  return seen == n;
}

TEST(Dag, SingleNodeForcedFamily) {
  ScmOptions opt;
  opt.hybrid = false;
  opt.forced_family = Family::mlp;
  RngStream rng(15, 15);
  const auto dag = sample_hybrid_dag({64, 5, 32}, opt, rng);
  ASSERT_EQ(dag.nodes.size(), 1u);
  EXPECT_EQ(dag.nodes[0].spec.family, Family::mlp);
  EXPECT_TRUE(dag.edges().empty());
  EXPECT_GE(dag.total_width(), 6u);
}

TEST(Dag, ThreeNodesRespectOrder) {
  ScmOptions opt;
  opt.forced_nodes = 3;
  RngStream rng(16, 16);
  const auto dag = sample_hybrid_dag({64, 5, 32}, opt, rng);
  ASSERT_EQ(dag.nodes.size(), 3u);
  for (auto [i, j] : dag.edges()) EXPECT_LT(i, j);
  EXPECT_FALSE(dag.nodes[1].parents.empty());
  EXPECT_FALSE(dag.nodes[2].parents.empty());
}

TEST(Dag, ThousandSampledDagsAreAcyclic) {
  ScmOptions opt;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    RngStream rng = derive_stream(17, i, Stage::scm);
    const auto dag = sample_hybrid_dag({64, 1 + i % 50, 32}, opt, rng);
    ASSERT_TRUE(acyclic_by_kahn(dag));
    ASSERT_GE(dag.nodes.size(), 1u);
    for (std::size_t j = 1; j < dag.nodes.size(); ++j) ASSERT_FALSE(dag.nodes[j].parents.empty());
    ASSERT_GT(dag.total_width(), 1 + i % 50);
  }
}

TEST(Dag, RawTaskShapeAndDeterminism) {
  ScmOptions opt;
  const TaskDims dims{8, 3, 4};
  RngStream a = derive_stream(18, 0, Stage::scm), b = derive_stream(18, 0, Stage::scm);
  const auto dag_a = sample_hybrid_dag(dims, opt, a);
  const auto dag_b = sample_hybrid_dag(dims, opt, b);
  ASSERT_EQ(dag_a, dag_b);
  const auto ta = generate_raw_task(dag_a, dims, a);
  const auto tb = generate_raw_task(dag_b, dims, b);
  ASSERT_EQ(ta.x.size(), 3u);
  for (const auto& c : ta.x) EXPECT_EQ(c.size(), 8u);
  EXPECT_EQ(ta.y.size(), 8u);
  EXPECT_EQ(ta.x, tb.x);
  EXPECT_EQ(ta.y, tb.y);
}

TEST(Dag, LinearTargetIsRecoveredByLeastSquares) {
  HybridDag dag;
  DagNode root;
  root.spec.family = Family::mlp;
  root.spec.output_width = 3;
  root.spec.root_inputs = 4;
  root.spec.mlp.widths = {3};
  root.spec.mlp.noise_scale = {0.0};
  root.spec.mlp.activation = Activation::tanh;
  DagNode lin;
  lin.spec.family = Family::mlp;
  lin.spec.output_width = 1;
  lin.spec.mlp.widths = {1};
  lin.spec.mlp.noise_scale = {0.0};
  lin.spec.mlp.activation = Activation::identity;
  lin.parents = {0};
  dag.nodes = {root, lin};
  dag.selection.feature_columns = {0, 1, 2};
  dag.selection.target_column = 3;
  const TaskDims dims{200, 3, 100};
  RngStream rng(19, 19);
  const auto task = generate_raw_task(dag, dims, rng);
  ColumnTable regressors = task.x;
  regressors.push_back(Column(200, 1.0));
  const auto beta = linalg::least_squares(regressors, task.y);
  ASSERT_TRUE(beta.has_value());
  double worst = 0.0;
  for (std::size_t t = 0; t < 200; ++t) {
    double fit = 0.0;
    for (std::size_t j = 0; j < 4; ++j) fit += (*beta)[j] * regressors[j][t];
    worst = std::max(worst, std::fabs(fit - task.y[t]));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Dag, BackwardEdgeIsRejected) {
  HybridDag dag;
  DagNode n;
  n.spec.mlp.widths = {2};
  n.spec.mlp.noise_scale = {0.0};
  n.spec.output_width = 2;
  dag.nodes = {n, n};
  dag.nodes[0].parents = {1};
  RngStream rng(1, 1);
  EXPECT_THROW(generate_raw_task(dag, {8, 1, 4}, rng), ConfigError);
}

}  // namespace
}  // namespace oprior::scm
