// SPDX-License-Identifier: Apache-2.0
//
// Small numeric kernels shared by every stage. All accumulation is in double.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace oprior::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Sample variance (ddof = 1); zero for fewer than two values.
inline double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

inline double stddev(std::span<const double> x) { return std::sqrt(variance(x)); }

/// Standardized third central moment (population form).
inline double skewness(std::span<const double> x) {
  if (x.size() < 3) return 0.0;
  const double m = mean(x);
  double m2 = 0.0;
  double m3 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  const double n = static_cast<double>(x.size());
  m2 /= n;
  m3 /= n;
  if (m2 <= 0.0) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n < 2) return 0.0;
  const double ma = mean(a.first(n));
  const double mb = mean(b.first(n));
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// Linear-interpolation quantile (Hyndman–Fan type 7) of a sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::span<const double> x, double q) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  return quantile_sorted(s, q);
}

inline double median(std::span<const double> x) { return quantile(x, 0.5); }

/// 1-based average ranks; tied values share the mean of their ranks.
inline std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

/// Piecewise-linear empirical CDF fitted on one sample. Distinct sample values
/// map to (average_rank - 0.5) / n; other inputs interpolate, and inputs
/// outside the sample range clamp to the end values.
class InterpolatedEcdf {
 public:
  InterpolatedEcdf() = default;
  explicit InterpolatedEcdf(std::span<const double> sample) {
    std::vector<double> s(sample.begin(), sample.end());
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
      std::size_t j = i + 1;
      while (j < s.size() && s[j] == s[i]) ++j;
      const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
      knots_.push_back(s[i]);
      levels_.push_back((avg_rank - 0.5) / n);
      i = j;
    }
  }

  [[nodiscard]] double operator()(double x) const {
    if (knots_.empty()) return 0.5;
    if (x <= knots_.front()) return levels_.front();
    if (x >= knots_.back()) return levels_.back();
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    const auto hi = static_cast<std::size_t>(it - knots_.begin());
    const std::size_t lo = hi - 1;
    const double w = (x - knots_[lo]) / (knots_[hi] - knots_[lo]);
    return levels_[lo] + w * (levels_[hi] - levels_[lo]);
  }

  [[nodiscard]] const std::vector<double>& knots() const { return knots_; }
  [[nodiscard]] const std::vector<double>& levels() const { return levels_; }

  bool operator==(const InterpolatedEcdf&) const = default;

 private:
  std::vector<double> knots_;
  std::vector<double> levels_;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Inverse standard normal CDF (Wichura, AS241 PPND16).
inline double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

inline double digamma(double x) {
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double f = 1.0 / (x * x);
  result += std::log(x) - 0.5 / x -
            f * (1.0 / 12.0 - f * (1.0 / 120.0 - f * (1.0 / 252.0 - f * (1.0 / 240.0 - f / 132.0))));
  return result;
}

/// Support moments of rows [0, n) of a column.
struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

inline Moments support_moments(std::span<const double> column, std::size_t n) {
  const auto support = column.first(std::min(n, column.size()));
  return {mean(support), stddev(support)};
}

}  // namespace oprior::stats
