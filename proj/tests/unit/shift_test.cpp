// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "oprior/shift.hpp"

namespace oprior::shift {
namespace {

WorkingTable gaussian_table(std::size_t rows, std::size_t cols, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, 31);
  ColumnTable x(cols, Column(rows));
  for (auto& c : x)
    for (auto& v : c) v = rng.normal();
  Column y(rows);
  for (auto& v : y) v = rng.normal();
  return make_working_table(std::move(x), std::move(y), {rows, cols, n, TaskKind::regression, 0}, false);
}

OmegaDraw hard_omega(std::uint64_t seed) {
  RngStream rng(seed, 5);
  return sample_omega(preset_profile(ProfileName::hard), rng);
}

double corr(std::span<const double> a, std::span<const double> b) { return stats::pearson(a, b); }

// --------------------------------------------------------------- confounding

TEST(Confounding, ZeroStrengthIsIdentity) {
  auto t = gaussian_table(200, 4, 120, 1);
  const auto before = t;
  auto w = hard_omega(1);
  w.values[std::string(param::confound_strength)] = 0.0;
  apply_confounding(fit_confounding(t, w, RngStream(1, 1)), t);
  EXPECT_EQ(t.x, before.x);
  EXPECT_EQ(t.y, before.y);
}

TEST(Confounding, AddsScaledFactor) {
  auto t = make_working_table({Column{0.0, 1.0}}, Column{3.0, 3.0}, {2, 1, 1}, false);
  ConfoundingPlan p;
  p.z = {2.0, -1.0};
  p.alpha_x = 0.5;
  p.alpha_y = 0.25;
  p.columns = {0};
  apply_confounding(p, t);
  EXPECT_EQ(t.x[0], (Column{1.0, 0.5}));
  EXPECT_EQ(t.y, (Column{3.5, 2.75}));
}

TEST(Confounding, InducesExpectedCorrelation) {
  auto t = gaussian_table(8000, 1, 4000, 2);
  ConfoundingPlan p = fit_confounding(t, hard_omega(2), RngStream(2, 2));
  p.alpha_x = p.alpha_y = 1.0;
  p.columns = {0};
  apply_confounding(p, t);
  EXPECT_NEAR(corr(t.x[0], t.y), 0.5, 0.05);
}

TEST(Confounding, FactorHasUnitSupportMoments) {
  auto t = gaussian_table(300, 3, 170, 3);
  const auto p = fit_confounding(t, hard_omega(3), RngStream(3, 3));
  const auto m = stats::support_moments(p.z, t.support());
  EXPECT_NEAR(m.mean, 0.0, 1e-6);
  EXPECT_NEAR(m.std, 1.0, 1e-6);
}

// ------------------------------------------------------------------ spurious

TEST(Spurious, ZeroGainGivesPureNoise) {
  auto t = gaussian_table(4000, 2, 2000, 4);
  SpuriousPlan p;
  p.columns.push_back({0, 0.0, 1.0, 1, 1.0});
  apply_spurious(p, t, RngStream(4, 4));
  const std::span<const double> x(t.x[0]), y(t.y);
  EXPECT_LT(std::fabs(corr(x.first(2000), y.first(2000))), 0.06);
  EXPECT_NEAR(stats::stddev(x), 1.0, 0.05);
  EXPECT_EQ(t.meta[0].provenance, Provenance::spurious);
}

TEST(Spurious, SignFlipReversesQueryCorrelation) {
  auto t = gaussian_table(4000, 2, 2000, 5);
  SpuriousPlan p;
  p.columns.push_back({1, 3.0, 1.0, -1, 1.0});
  apply_spurious(p, t, RngStream(5, 5));
  const std::span<const double> x(t.x[1]), y(t.y);
  const double expect = 3.0 / std::sqrt(10.0);
  EXPECT_NEAR(corr(x.first(2000), y.first(2000)), expect, 0.02);
  EXPECT_NEAR(corr(x.subspan(2000), y.subspan(2000)), -expect, 0.02);
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

TEST(Spurious, FullStrengthSameSignMatchesSupportDistribution) {
  auto t = gaussian_table(3000, 1, 1500, 6);
  SpuriousPlan p;
  p.columns.push_back({0, 2.0, 1.0, 1, 1.0});
  apply_spurious(p, t, RngStream(6, 6));
  const std::span<const double> x(t.x[0]);
  const std::vector<double> sup(x.begin(), x.begin() + 1500), qry(x.begin() + 1500, x.end());
  // 5% two-sample critical value.
  EXPECT_LT(ks_statistic(sup, qry), 1.36 * std::sqrt(2.0 / 1500.0));
}

TEST(Spurious, PicksLeastCorrelatedColumns) {
  auto t = gaussian_table(500, 4, 300, 7);
  for (std::size_t r = 0; r < 500; ++r) t.x[2][r] = t.y[r] + 0.1 * t.x[2][r];
  auto w = hard_omega(7);
  w.values[std::string(param::spurious_fraction)] = 0.75;
  const auto p = fit_spurious(t, w, RngStream(7, 7));
  ASSERT_EQ(p.columns.size(), 3u);
  for (const auto& c : p.columns) EXPECT_NE(c.column, 2u);
}

// ----------------------------------------------------------------- covariate

TEST(CovariateShift, IdentityAffineIsNoop) {
  auto t = gaussian_table(50, 2, 30, 8);
  const auto x = t.x;
  apply_covariate_shift({{0, 1.0, 0.0}, {1, 1.0, 0.0}}, t);
  EXPECT_EQ(t.x, x);
}

TEST(CovariateShift, OnlyQueryRowsMove) {
  auto t = make_working_table({Column{3.0, 3.0}}, Column{0.0, 1.0}, {2, 1, 1}, false);
  apply_covariate_shift({{0, 2.0, 1.0}}, t);
  EXPECT_EQ(t.x[0][0], 3.0);
  EXPECT_EQ(t.x[0][1], 7.0);
}

TEST(CovariateShift, SupportBytesUnchanged) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto t = gaussian_table(150, 6, 90, seed);
    const auto x = t.x;
    apply_covariate_shift(fit_covariate_shift(t, hard_omega(seed), RngStream(seed, 8)), t);
    for (std::size_t j = 0; j < 6; ++j)
      EXPECT_EQ(std::memcmp(x[j].data(), t.x[j].data(), 90 * sizeof(double)), 0);
  }
}

// ------------------------------------------------------------------ seasonal

TEST(Seasonal, ZeroAmplitudeIsIdentity) {
  Column y{1, 2, 3};
  apply_seasonal({0.0, 0.3, 1.0}, y);
  EXPECT_EQ(y, (Column{1, 2, 3}));
}

TEST(Seasonal, ZeroPhaseStartsAtZero) {
  Column y(10, 0.0);
  apply_seasonal({1.0, 2.0 * std::numbers::pi / 16.0, 0.0}, y);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_NEAR(y[4], 1.0, 1e-12);
}

TEST(Seasonal, AmplitudeRecoveredByHarmonicFit) {
  RngStream rng(9, 9);
  const std::size_t rows = 4000;
  Column y(rows);
  for (auto& v : y) v = 0.05 * rng.normal();
  const SeasonalPlan p{1.0, 2.0 * std::numbers::pi / 50.0, 0.7};
  apply_seasonal(p, y);
  double ss = 0, cc = 0, sc = 0, ys = 0, yc = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double s = std::sin(p.frequency * r), c = std::cos(p.frequency * r);
    ss += s * s;
    cc += c * c;
    sc += s * c;
    ys += y[r] * s;
    yc += y[r] * c;
  }
  const double det = ss * cc - sc * sc;
  const double a = (ys * cc - yc * sc) / det;
  const double b = (yc * ss - ys * sc) / det;
  const double amp = std::hypot(a, b);
  EXPECT_GE(amp, 0.99);
  EXPECT_LE(amp, 1.01);
}

TEST(Seasonal, PeriodInRange) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto t = gaussian_table(600, 1, 300, seed);
    const auto p = fit_seasonal(t, hard_omega(seed), RngStream(seed, 10));
    const double period = 2.0 * std::numbers::pi / p.frequency;
    EXPECT_GE(period, 16.0 - 1e-9);
    EXPECT_LE(period, 300.0 + 1e-9);
  }
}

// -------------------------------------------------------------------- regime

TEST(Regime, IdenticalSegmentsAreIdentity) {
  auto t = gaussian_table(100, 1, 60, 11);
  const auto x = t.x;
  RegimePlan p;
  p.change_points = {40.0};
  p.blend = Blend::sigmoid;
  p.width = 3.0;
  p.columns.push_back({0, {{1.0, 0.0}, {1.0, 0.0}}});
  apply_regime(p, t);
  for (std::size_t r = 0; r < 100; ++r) EXPECT_DOUBLE_EQ(t.x[0][r], x[0][r]);
}

TEST(Regime, AbruptOffsetShiftsMean) {
  auto t = gaussian_table(2000, 1, 1000, 12);
  RegimePlan p;
  p.change_points = {1000.0};
  p.blend = Blend::abrupt;
  p.columns.push_back({0, {{1.0, 0.0}, {1.0, 5.0}}});
  apply_regime(p, t);
  const std::span<const double> x(t.x[0]);
  EXPECT_NEAR(stats::mean(x.subspan(1000)) - stats::mean(x.first(1000)), 5.0, 0.2);
}

TEST(Regime, SigmoidHalfWayAtChangePoint) {
  EXPECT_EQ(regime_weight(Blend::sigmoid, 37.0, 37.0, 4.0), 0.5);
  EXPECT_EQ(regime_weight(Blend::abrupt, 36.9, 37.0, 4.0), 0.0);
  EXPECT_EQ(regime_weight(Blend::abrupt, 37.0, 37.0, 4.0), 1.0);
}

TEST(Regime, FittedPlansAreOrdered) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto t = gaussian_table(400, 5, 200, seed);
    const auto p = fit_regime(t, hard_omega(seed), RngStream(seed, 13));
    EXPECT_FALSE(p.change_points.empty());
    EXPECT_TRUE(std::is_sorted(p.change_points.begin(), p.change_points.end()));
    EXPECT_GE(p.width, 1.0);
    for (const auto& c : p.columns) {
      EXPECT_EQ(c.segments.size(), p.change_points.size() + 1);
      EXPECT_EQ(c.segments[0], (Affine{1.0, 0.0}));
    }
  }
}

// ------------------------------------------------------------------- leakage

TEST(ShiftFits, IgnoreQueryRows) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto a = gaussian_table(160, 5, 90, seed);
    auto b = a;
    for (auto& c : b.x)
      for (std::size_t r = 90; r < 160; ++r) c[r] = 5e5;
    for (std::size_t r = 90; r < 160; ++r) b.y[r] = -5e5;
    const auto w = hard_omega(seed);
    const RngStream rng(seed, 14);
    EXPECT_EQ(fit_confounding(a, w, rng), fit_confounding(b, w, rng));
    EXPECT_EQ(fit_spurious(a, w, rng), fit_spurious(b, w, rng));
    EXPECT_EQ(fit_covariate_shift(a, w, rng), fit_covariate_shift(b, w, rng));
    EXPECT_EQ(fit_seasonal(a, w, rng), fit_seasonal(b, w, rng));
    EXPECT_EQ(fit_regime(a, w, rng), fit_regime(b, w, rng));
  }
}

}  // namespace
}  // namespace oprior::shift
