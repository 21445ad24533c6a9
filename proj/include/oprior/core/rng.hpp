// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random streams. A stream is addressed by
// (master_seed, episode_index, stage, attempt) and owns no shared state, so
// episodes can be generated on any thread in any order and still reproduce
// bit-for-bit. Child streams are derived with fork(label).
//
// The samplers below are written out instead of using <random>
// distributions, whose output is implementation-defined.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

namespace oprior {

enum class Stage : std::uint64_t {
  hyperprior = 1,
  dims = 2,
  scm = 3,
  realism = 4,
  shift = 5,
  target = 6,
  qc = 7,
  eval = 8,
  io = 9,
};

namespace detail {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// SplitMix-style gamma: odd, with enough bit transitions.
constexpr std::uint64_t mix_gamma(std::uint64_t z) {
  z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
  z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
  z = (z ^ (z >> 33)) | 1ULL;
  const auto transitions = std::popcount(z ^ (z >> 1));
  return transitions < 24 ? z ^ 0xaaaaaaaaaaaaaaaaULL : z;
}

constexpr std::uint64_t combine(std::uint64_t key, std::uint64_t value) {
  return mix64(key ^ mix64(value + kGolden));
}

}  // namespace detail

class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t gamma)
      : seed_(seed), gamma_(detail::mix_gamma(gamma)) {}

  /// Pure function of its inputs: same triple, same byte sequence.
  static RngStream derive(std::uint64_t master_seed, std::uint64_t episode_index,
                          Stage stage, std::uint64_t attempt = 0) {
    std::uint64_t key = detail::mix64(master_seed + detail::kGolden);
    key = detail::combine(key, episode_index);
    key = detail::combine(key, static_cast<std::uint64_t>(stage));
    key = detail::combine(key, attempt);
    return RngStream(key, detail::combine(key, 0x5eedULL));
  }

  /// Independent child stream; does not advance this one.
  [[nodiscard]] RngStream fork(std::uint64_t label) const {
    const std::uint64_t key = detail::combine(seed_ ^ gamma_, label);
    return RngStream(key, detail::combine(key, 0x6a09e667f3bcc909ULL));
  }

  std::uint64_t next_u64() {
    ++counter_;
    return detail::mix64(seed_ + counter_ * gamma_);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1).
  double uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-shift with rejection.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }
  /// Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Marsaglia–Tsang; shape > 0, unit scale.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform_open();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x;
      double v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double chi_squared(double dof) { return 2.0 * gamma(0.5 * dof); }

  double student_t(double dof) { return normal() / std::sqrt(chi_squared(dof) / dof); }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

  /// Poisson with mean lambda >= 0. Knuth below 10, PTRS (Hörmann) above.
  std::int64_t poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda < 10.0) {
      const double limit = std::exp(-lambda);
      double prod = uniform_open();
      std::int64_t k = 0;
      while (prod > limit) {
        prod *= uniform_open();
        ++k;
      }
      return k;
    }
    const double slam = std::sqrt(lambda);
    const double loglam = std::log(lambda);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform_open();
      const double us = 0.5 - std::fabs(u);
      const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
      if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
      if (k < 0.0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
          -lambda + k * loglam - std::lgamma(k + 1.0)) {
        return static_cast<std::int64_t>(k);
      }
    }
  }

  /// Negative binomial as a gamma–Poisson mixture with the given mean.
  std::int64_t negative_binomial(double mean, double dispersion) {
    const double rate = gamma(dispersion) * mean / dispersion;
    return poisson(rate);
  }

  /// Index drawn proportionally to non-negative weights.
  std::size_t categorical(std::span<const double> weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (u < weights[i]) return i;
      u -= weights[i];
    }
    // Rounding residue: return the last positive weight.
    for (std::size_t i = weights.size(); i-- > 0;) {
      if (weights[i] > 0.0) return i;
    }
    return 0;
  }

  std::vector<double> dirichlet(std::size_t k, double concentration) {
    std::vector<double> out(k);
    double total = 0.0;
    for (auto& v : out) {
      v = gamma(concentration);
      total += v;
    }
    for (auto& v : out) v /= total;
    return out;
  }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    shuffle(p);
    return p;
  }

  /// k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    auto p = permutation(n);
    p.resize(std::min(k, n));
    return p;
  }

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t gamma_increment() const { return gamma_; }
  [[nodiscard]] std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t gamma_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Free-function spelling of RngStream::derive.
inline RngStream derive_stream(std::uint64_t master_seed, std::uint64_t episode_index,
                               Stage stage, std::uint64_t attempt = 0) {
  return RngStream::derive(master_seed, episode_index, stage, attempt);
}

}  // namespace oprior
