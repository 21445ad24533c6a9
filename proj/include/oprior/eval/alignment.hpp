// SPDX-License-Identifier: Apache-2.0
//
// Structural alignment of generated tables with a reference table: pooled
// marginal score, correlation-spectrum score, composite Q, and the
// Monte-Carlo protocol over independent iterations.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "oprior/core/error.hpp"
#include "oprior/core/matrix.hpp"
#include "oprior/core/rng.hpp"
#include "oprior/eval/spectrum.hpp"
#include "oprior/eval/wasserstein.hpp"
#include "oprior/pipeline.hpp"

namespace oprior::eval {

inline constexpr double kSpectrumScale = 5.0;

struct ScoreAndDistance {
  double score = 1.0;
  double w1 = 0.0;
};

inline double marginal_score_from_w1(double w1) { return std::exp(-w1); }
inline double spectrum_score_from_w1(double w1) { return std::exp(-kSpectrumScale * w1); }

inline double composite_quality(double s_marginal, double s_corr) {
  if (!(s_marginal >= 0.0 && s_marginal <= 1.0 && s_corr >= 0.0 && s_corr <= 1.0)) {
    throw EvalError("scores must lie in [0, 1]");
  }
  return std::sqrt(s_marginal * s_corr);
}

/// Pools every cell of every synthetic table and every non-NaN reference
/// cell, caps each pool by reservoir sampling, rank-normalizes each pool on
/// its own, and scores exp(-W1).
inline ScoreAndDistance pooled_marginal_score(const std::vector<Matrix<double>>& synthetic,
                                              const Matrix<double>& reference, std::size_t cap, RngStream rng) {
  if (synthetic.empty()) throw EvalError("no synthetic tables");
  Reservoir syn(cap, rng.fork(0));
  for (const auto& t : synthetic) {
    for (double v : t.data()) {
      if (std::isfinite(v)) syn.add(v);
    }
  }
  Reservoir ref(cap, rng.fork(1));
  for (double v : reference.data()) {
    if (std::isfinite(v)) ref.add(v);
  }
  if (syn.items().empty() || ref.items().empty()) throw EvalError("empty marginal pool");
  const double w1 = wasserstein1(rank_normalize(syn.items()), rank_normalize(ref.items()));
  return {marginal_score_from_w1(w1), w1};
}

/// Eigenvalues divided by the number of retained columns.
inline std::vector<double> normalized_spectrum(const Matrix<double>& table) {
  auto s = correlation_spectrum(table);
  const double p = static_cast<double>(s.size());
  for (double& v : s) v /= p;
  return s;
}

/// Tables without a valid spectrum (fewer than two usable columns) are
/// skipped; at least one must remain.
inline ScoreAndDistance spectrum_score(const std::vector<Matrix<double>>& synthetic, const Matrix<double>& reference) {
  std::vector<double> pooled;
  for (const auto& t : synthetic) {
    try {
      const auto s = normalized_spectrum(t);
      pooled.insert(pooled.end(), s.begin(), s.end());
    } catch (const EvalError&) {
    }
  }
  if (pooled.empty()) throw EvalError("no synthetic table has a valid correlation spectrum");
  const double w1 = wasserstein1(pooled, normalized_spectrum(reference));
  return {spectrum_score_from_w1(w1), w1};
}

struct EvalProtocol {
  std::size_t iterations = 10;
  std::size_t tables_per_iteration = 50;
  std::size_t pool_cap = 100000;
  std::uint64_t seed = 0;

  [[nodiscard]] bool valid() const { return iterations > 0 && tables_per_iteration > 0 && pool_cap > 0; }
};

struct MetricSeries {
  std::vector<double> values;
  double mean = 0.0;
  double std = 0.0;  // population

  void finish() {
    mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double s = 0.0;
    for (double v : values) s += (v - mean) * (v - mean);
    std = std::sqrt(s / static_cast<double>(values.size()));
  }
};

struct AlignmentScores {
  MetricSeries s_marginal;
  MetricSeries s_corr;
  MetricSeries q;
  MetricSeries w1_marginal;
  MetricSeries w1_spectrum;
  std::vector<double> reference_spectrum;
  std::vector<std::vector<double>> synthetic_spectra;  // last iteration
};

/// Produces `count` tables for an iteration from the iteration's stream.
using TableSource = std::function<std::vector<Matrix<double>>(std::size_t iteration, std::size_t count, RngStream& rng)>;

inline Matrix<double> episode_table(const Episode& e) {
  Matrix<double> m(e.x.rows(), e.x.cols());
  for (std::size_t i = 0; i < m.data().size(); ++i) m.data()[i] = static_cast<double>(e.x.data()[i]);
  return m;
}

/// Episodes of a generator configuration. Each table uses an episode index
/// drawn uniformly from [0, index_range) and the iteration's seed, so
/// curriculum variants are sampled across their whole schedule.
inline TableSource generator_source(VariantConfig cfg, std::uint64_t index_range = 10000) {
  return [cfg = std::move(cfg), index_range](std::size_t, std::size_t count, RngStream& rng) {
    std::vector<Matrix<double>> out;
    const std::uint64_t seed = rng.next_u64();
    std::size_t failures = 0;
    while (out.size() < count) {
      const std::uint64_t i = rng.below(index_range);
      try {
        out.push_back(episode_table(generate_until_valid(cfg, i, seed).episode));
      } catch (const ExhaustedError&) {
        if (++failures > 10 * count) throw;
      }
    }
    return out;
  };
}

/// Independent standard-normal tables with the reference's shape.
inline TableSource gaussian_source(std::size_t rows, std::size_t cols) {
  return [rows, cols](std::size_t, std::size_t count, RngStream& rng) {
    std::vector<Matrix<double>> out;
    for (std::size_t k = 0; k < count; ++k) {
      Matrix<double> m(rows, cols);
      for (double& v : m.data()) v = rng.normal();
      out.push_back(std::move(m));
    }
    return out;
  };
}

/// Independent standard-normal tables whose shape is drawn per table from a
/// generator's dims ranges: same schema law as the generator, no dependence.
inline TableSource gaussian_source(const DimsRanges& dims) {
  return [dims](std::size_t, std::size_t count, RngStream& rng) {
    std::vector<Matrix<double>> out;
    for (std::size_t k = 0; k < count; ++k) {
      const auto rows = static_cast<std::size_t>(
          rng.integer(static_cast<std::int64_t>(dims.rows_min), static_cast<std::int64_t>(dims.rows_max)));
      const auto cols = static_cast<std::size_t>(
          rng.integer(static_cast<std::int64_t>(dims.features_min), static_cast<std::int64_t>(dims.features_max)));
      Matrix<double> m(rows, cols);
      for (double& v : m.data()) v = rng.normal();
      out.push_back(std::move(m));
    }
    return out;
  };
}

/// The reference itself, repeated.
inline TableSource replay_source(Matrix<double> reference) {
  return [ref = std::move(reference)](std::size_t, std::size_t count, RngStream&) {
    return std::vector<Matrix<double>>(count, ref);
  };
}

/// Fixed list of tables (e.g. read from disk), cycled in order per iteration.
inline TableSource fixed_source(std::vector<Matrix<double>> tables) {
  if (tables.empty()) throw EvalError("no tables to evaluate");
  return [tables = std::move(tables)](std::size_t iteration, std::size_t count, RngStream&) {
    std::vector<Matrix<double>> out;
    for (std::size_t k = 0; k < count; ++k) out.push_back(tables[(iteration * count + k) % tables.size()]);
    return out;
  };
}

inline AlignmentScores evaluate_generator(const TableSource& source, const Matrix<double>& reference,
                                          const EvalProtocol& protocol) {
  if (!protocol.valid()) throw EvalError("invalid evaluation protocol");
  AlignmentScores out;
  out.reference_spectrum = normalized_spectrum(reference);
  for (std::size_t it = 0; it < protocol.iterations; ++it) {
    RngStream rng = RngStream::derive(protocol.seed, it, Stage::eval);
    RngStream table_rng = rng.fork(0);
    const auto tables = source(it, protocol.tables_per_iteration, table_rng);
    const auto m = pooled_marginal_score(tables, reference, protocol.pool_cap, rng.fork(1));
    const auto c = spectrum_score(tables, reference);
    out.s_marginal.values.push_back(m.score);
    out.w1_marginal.values.push_back(m.w1);
    out.s_corr.values.push_back(c.score);
    out.w1_spectrum.values.push_back(c.w1);
    out.q.values.push_back(composite_quality(m.score, c.score));
    if (it + 1 == protocol.iterations) {
      out.synthetic_spectra.clear();
      for (const auto& t : tables) {
        try {
          out.synthetic_spectra.push_back(normalized_spectrum(t));
        } catch (const EvalError&) {
        }
      }
    }
  }
  for (auto* s : {&out.s_marginal, &out.s_corr, &out.q, &out.w1_marginal, &out.w1_spectrum}) s->finish();
  return out;
}

inline nlohmann::json to_json(const MetricSeries& m) {
  return {{"per_iteration", m.values}, {"mean", m.mean}, {"std", m.std}};
}

inline nlohmann::json to_json(const AlignmentScores& s, const EvalProtocol& p) {
  return {{"protocol",
           {{"iterations", p.iterations},
            {"tables_per_iteration", p.tables_per_iteration},
            {"pool_cap", p.pool_cap},
            {"seed", p.seed}}},
          {"S_marginal", to_json(s.s_marginal)},
          {"S_corr", to_json(s.s_corr)},
          {"Q", to_json(s.q)},
          {"W1_marginal", to_json(s.w1_marginal)},
          {"W1_spectrum", to_json(s.w1_spectrum)},
          {"spectra", {{"reference", s.reference_spectrum}, {"synthetic", s.synthetic_spectra}}}};
}

}  // namespace oprior::eval
