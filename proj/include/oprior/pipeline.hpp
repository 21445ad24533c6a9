// SPDX-License-Identifier: Apache-2.0
//
// One episode end to end: hyperprior draw, dims, SCM, realism, shift, QC,
// and deterministic batched generation to disk.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "oprior/core/episode.hpp"
#include "oprior/core/error.hpp"
#include "oprior/core/rng.hpp"
#include "oprior/hyperprior.hpp"
#include "oprior/io/episode_file.hpp"
#include "oprior/io/manifest.hpp"
#include "oprior/qc.hpp"
#include "oprior/realism/augment.hpp"
#include "oprior/realism/missingness.hpp"
#include "oprior/realism/morph.hpp"
#include "oprior/realism/preprocess.hpp"
#include "oprior/realism/subgroup.hpp"
#include "oprior/realism/table.hpp"
#include "oprior/realism/target.hpp"
#include "oprior/scm/dag.hpp"
#include "oprior/shift.hpp"
#include "oprior/variant.hpp"

namespace oprior {

using StagePlan = std::variant<std::monostate, realism::Preprocessor, realism::AugmentPlan, realism::MorphPlan,
                               realism::MissingnessPlan, realism::TargetTransform, realism::SubgroupPlan,
                               shift::ConfoundingPlan, shift::SpuriousPlan, std::vector<shift::CovariateShiftColumn>,
                               shift::SeasonalPlan, shift::RegimePlan>;

/// A realism or shift stage: mutates the table in place and returns the
/// statistics it fitted. Running it twice on equal tables gives equal results.
struct PipelineStage {
  std::string name;
  std::function<StagePlan(WorkingTable&)> run;
};

/// Everything decided before the SCM runs.
struct EpisodeContext {
  std::uint64_t batch_index = 0;
  std::uint64_t episode_index = 0;
  std::uint64_t master_seed = 0;
  std::size_t attempt = 0;
  double alpha = 1.0;
  EffectiveProfile profile;
  OmegaDraw omega;
  TaskDims dims;
  bool hybrid = true;
};

struct EpisodeTrace {
  EpisodeContext context;
  scm::HybridDag dag;
  std::vector<std::pair<std::string, StagePlan>> plans;
};

inline EffectiveProfile effective_profile(const VariantConfig& cfg, std::uint64_t s, double* alpha_out = nullptr) {
  double alpha = 1.0;
  RealismProfile p0;
  RealismProfile p1;
  if (cfg.curriculum && cfg.schedule.kind != ScheduleKind::none) {
    alpha = schedule_alpha(cfg.schedule, s);
    p0 = cfg.profile(cfg.schedule.start);
    p1 = cfg.profile(cfg.schedule.end);
  } else {
    p0 = p1 = cfg.profile(cfg.static_profile());
  }
  if (alpha_out != nullptr) *alpha_out = alpha;
  return mix_profiles(p0, p1, alpha);
}

/// T and d uniform in the configured ranges, n = round(support_fraction * T)
/// kept inside [2, T - 1], task kind and class count from omega.
inline TaskDims sample_dims(const VariantConfig& cfg, const OmegaDraw& w, RngStream rng) {
  TaskDims d;
  d.rows = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(cfg.dims.rows_min),
                                                static_cast<std::int64_t>(cfg.dims.rows_max)));
  d.features = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(cfg.dims.features_min),
                                                    static_cast<std::int64_t>(cfg.dims.features_max)));
  const auto n = std::llround(w.value(param::support_fraction) * static_cast<double>(d.rows));
  d.support_size = static_cast<std::size_t>(std::clamp<long long>(n, 2, static_cast<long long>(d.rows) - 1));
  d.task_kind = parse_enum<TaskKind>(w.choice(param::task_kind));
  if (d.task_kind == TaskKind::classification) {
    const auto k = std::llround(w.value(param::n_classes));
    d.n_classes = static_cast<std::size_t>(std::clamp<long long>(k, 2, static_cast<long long>(kMaxClasses)));
  }
  return d;
}

inline EpisodeContext prepare_episode(const VariantConfig& cfg, std::uint64_t s, std::uint64_t i, std::uint64_t seed,
                                      std::size_t attempt) {
  EpisodeContext ctx;
  ctx.batch_index = s;
  ctx.episode_index = i;
  ctx.master_seed = seed;
  ctx.attempt = attempt;
  ctx.profile = effective_profile(cfg, s, &ctx.alpha);
  RngStream h = RngStream::derive(seed, i, Stage::hyperprior, attempt);
  ctx.omega = sample_omega(ctx.profile, h);
  ctx.dims = sample_dims(cfg, ctx.omega, RngStream::derive(seed, i, Stage::dims, attempt));
  RngStream scm_rng = RngStream::derive(seed, i, Stage::scm, attempt);
  RngStream coin = scm_rng.fork(0);
  const bool coin_hybrid = coin.bernoulli(0.5);
  ctx.hybrid = cfg.base_scm && cfg.hybrid_scm ? coin_hybrid : cfg.hybrid_scm;
  return ctx;
}

/// Raw SCM output wrapped as a working table.
inline WorkingTable sample_raw_table(const VariantConfig& cfg, const EpisodeContext& ctx, scm::HybridDag* dag_out) {
  const RngStream scm_rng = RngStream::derive(ctx.master_seed, ctx.episode_index, Stage::scm, ctx.attempt);
  scm::ScmOptions opt = cfg.scm;
  opt.hybrid = ctx.hybrid;
  RngStream dag_rng = scm_rng.fork(1);
  scm::HybridDag dag = scm::sample_hybrid_dag(ctx.dims, opt, dag_rng);
  RngStream eval_rng = scm_rng.fork(2);
  auto raw = scm::generate_raw_task(dag, ctx.dims, eval_rng);
  dag.selection = raw.selection;
  if (dag_out != nullptr) *dag_out = dag;
  return make_working_table(std::move(raw.x), std::move(raw.y), ctx.dims, raw.sequence_structured);
}

/// Realism stages (preprocess, augment, morph, missingness, target, subgroup)
/// followed by the gated shift stages. Disabled stages are left out; the
/// preprocess and target stages always run.
inline std::vector<PipelineStage> build_stages(const VariantConfig& cfg, const EpisodeContext& ctx) {
  const auto& w = ctx.omega;
  const bool real = cfg.realism != RealismLevel::off;
  const RngStream rr = RngStream::derive(ctx.master_seed, ctx.episode_index, Stage::realism, ctx.attempt);
  const RngStream tr = RngStream::derive(ctx.master_seed, ctx.episode_index, Stage::target, ctx.attempt);
  const RngStream sr = RngStream::derive(ctx.master_seed, ctx.episode_index, Stage::shift, ctx.attempt);
  const std::size_t d_max = cfg.dims.features_max;
  auto tt = std::make_shared<realism::TargetTransform>();
  auto relabel = [tt, tr](WorkingTable& t) { realism::relabel(*tt, t, tr); };

  std::vector<PipelineStage> st;
  st.push_back({"preprocess", [=](WorkingTable& t) -> StagePlan {
                  RngStream r = rr.fork(1);
                  auto p = real ? realism::fit_preprocessor(t, w, r) : realism::standardizing_preprocessor(t);
                  realism::apply_preprocessor(p, t);
                  return p;
                }});
  if (real && w.augmentation) {
    st.push_back({"augment", [=](WorkingTable& t) -> StagePlan {
                    RngStream r = rr.fork(2);
                    auto p = realism::fit_augment(t, d_max, r);
                    realism::apply_augment(p, t, rr.fork(3));
                    return p;
                  }});
  }
  if (real) {
    st.push_back({"morph", [=](WorkingTable& t) -> StagePlan {
                    RngStream r = rr.fork(4);
                    auto p = realism::fit_morph(t, w, r);
                    realism::apply_morph(p, t, rr.fork(5));
                    return p;
                  }});
    st.push_back({"missingness", [=](WorkingTable& t) -> StagePlan {
                    RngStream r = rr.fork(6);
                    auto p = realism::fit_missingness(t, w, r);
                    return realism::apply_missingness(std::move(p), t, rr.fork(7));
                  }});
  }
  st.push_back({"target", [=](WorkingTable& t) -> StagePlan {
                  RngStream r = tr;
                  *tt = realism::transform_target(t, w, real, r);
                  return *tt;
                }});
  if (real && w.subgroups) {
    st.push_back({"subgroup", [=](WorkingTable& t) -> StagePlan {
                    if (t.cols() >= d_max) return std::monostate{};
                    RngStream r = rr.fork(8);
                    auto p = realism::fit_subgroup(t, r);
                    p = realism::apply_subgroup(std::move(p), t, rr.fork(9));
                    relabel(t);
                    return p;
                  }});
  }
  if (cfg.shift) {
    if (w.confounding) {
      st.push_back({"confounding", [=](WorkingTable& t) -> StagePlan {
                      auto p = shift::fit_confounding(t, w, sr.fork(0));
                      shift::apply_confounding(p, t);
                      relabel(t);
                      return p;
                    }});
    }
    if (w.spurious) {
      st.push_back({"spurious", [=](WorkingTable& t) -> StagePlan {
                      auto p = shift::fit_spurious(t, w, sr.fork(1));
                      shift::apply_spurious(p, t, sr.fork(2));
                      return p;
                    }});
    }
    if (w.covariate_shift) {
      st.push_back({"covariate_shift", [=](WorkingTable& t) -> StagePlan {
                      auto p = shift::fit_covariate_shift(t, w, sr.fork(3));
                      shift::apply_covariate_shift(p, t);
                      return p;
                    }});
    }
    if (w.seasonal_drift) {
      st.push_back({"seasonal_drift", [=](WorkingTable& t) -> StagePlan {
                      if (!t.sequence_structured) return std::monostate{};
                      auto p = shift::fit_seasonal(t, w, sr.fork(4));
                      shift::apply_seasonal(p, shift::shift_target(t));
                      relabel(t);
                      return p;
                    }});
    }
    if (w.regime_drift) {
      st.push_back({"regime_drift", [=](WorkingTable& t) -> StagePlan {
                      if (!t.sequence_structured) return std::monostate{};
                      auto p = shift::fit_regime(t, w, sr.fork(5));
                      shift::apply_regime(p, t);
                      return p;
                    }});
    }
  }
  return st;
}

inline Episode to_episode(const WorkingTable& t) {
  Episode e;
  e.dims = t.dims;
  e.dims.rows = t.rows();
  e.dims.features = t.cols();
  e.x = Matrix<float>(t.rows(), t.cols());
  e.mask = Matrix<std::uint8_t>(t.rows(), t.cols(), 0);
  for (std::size_t c = 0; c < t.cols(); ++c) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
      e.x(r, c) = static_cast<float>(t.x[c][r]);
      e.mask(r, c) = t.mask[c][r];
    }
  }
  e.y.assign(t.y.begin(), t.y.end());
  for (std::size_t r = 0; r < t.rows(); ++r) e.y[r] = static_cast<float>(t.y[r]);
  e.col_meta = t.meta;
  return e;
}

struct AttemptResult {
  Episode episode;
  QcVerdict verdict;
  EpisodeTrace trace;
};

/// One pass through every stage with the attempt's streams. Numeric and
/// selection failures come back as a numeric_failure verdict.
inline AttemptResult run_attempt(const VariantConfig& cfg, std::uint64_t s, std::uint64_t i, std::uint64_t seed,
                                 std::size_t attempt) {
  AttemptResult res;
  res.trace.context = prepare_episode(cfg, s, i, seed, attempt);
  try {
    WorkingTable t = sample_raw_table(cfg, res.trace.context, &res.trace.dag);
    for (const auto& stage : build_stages(cfg, res.trace.context)) {
      res.trace.plans.emplace_back(stage.name, stage.run(t));
    }
    res.episode = to_episode(t);
    res.verdict = check_episode(res.episode, cfg.qc);
  } catch (const NumericError&) {
    res.verdict = QcVerdict::reject(QcReason::numeric_failure);
  } catch (const SelectionError&) {
    res.verdict = QcVerdict::reject(QcReason::numeric_failure);
  }
  return res;
}

struct GeneratedEpisode {
  Episode episode;
  io::EpisodeHeader header;
  EpisodeTrace trace;
};

/// First accepted attempt for episode i at batch index s; throws
/// ExhaustedError after max_resamples rejections.
inline GeneratedEpisode generate_episode(const VariantConfig& cfg, std::uint64_t s, std::uint64_t i,
                                         std::uint64_t seed) {
  if (const auto why = cfg.invalid_reason(); !why.empty()) throw ConfigError(why);
  QcVerdict last;
  for (std::size_t attempt = 0; attempt < cfg.qc.max_resamples; ++attempt) {
    auto res = run_attempt(cfg, s, i, seed, attempt);
    last = res.verdict;
    if (!res.verdict.accepted) continue;
    GeneratedEpisode g;
    g.episode = std::move(res.episode);
    g.header.variant = cfg.name;
    g.header.master_seed = seed;
    g.header.episode_index = i;
    g.header.batch_index = s;
    g.header.attempts = attempt + 1;
    g.header.qc = res.verdict;
    g.trace = std::move(res.trace);
    return g;
  }
  throw ExhaustedError("episode " + std::to_string(i) + " rejected " + std::to_string(cfg.qc.max_resamples) +
                       " times (last reason: " + std::string(to_string(last.reason)) + ")");
}

/// Batch index from the episode index: s = floor(i / batch_size).
inline GeneratedEpisode generate_until_valid(const VariantConfig& cfg, std::uint64_t i, std::uint64_t seed) {
  return generate_episode(cfg, i / cfg.batch_size, i, seed);
}

// ---------------------------------------------------------------------------
// Batches

struct BatchSummary {
  std::size_t requested = 0;
  std::size_t accepted = 0;
  std::size_t exhausted = 0;
  std::size_t total_attempts = 0;
  double seconds = 0.0;
};

inline std::string episode_file_name(std::uint64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "episode_%06llu.opep", static_cast<unsigned long long>(i));
  return buf;
}

/// Writes episode files, manifest.jsonl (accepted episodes, in index order)
/// and exhausted.jsonl into `out`. Output bytes do not depend on `workers`.
inline BatchSummary generate_batch(const VariantConfig& cfg, std::size_t count, std::uint64_t seed,
                                   std::size_t workers, const std::filesystem::path& out,
                                   const std::function<void(std::size_t done, std::size_t total)>& progress = {}) {
  if (count == 0) throw ConfigError("count must be at least 1");
  if (const auto why = cfg.invalid_reason(); !why.empty()) throw ConfigError(why);
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create '" + out.string() + "': " + ec.message());
  const auto start = std::chrono::steady_clock::now();

  struct Slot {
    bool done = false;
    bool accepted = false;
    io::ManifestRecord record;
    std::string failure;
    std::exception_ptr error;
  };
  std::vector<Slot> slots(count);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      Slot slot;
      try {
        try {
          auto g = generate_until_valid(cfg, i, seed);
          slot.record.path = episode_file_name(i);
          slot.record.attempts = g.header.attempts;
          slot.record.dims = g.episode.dims;
          io::write_episode(g.episode, g.header, out / slot.record.path);
          slot.accepted = true;
        } catch (const ExhaustedError& e) {
          slot.failure = e.what();
          slot.record.attempts = cfg.qc.max_resamples;
        }
        slot.record.episode_index = i;
        slot.record.seed = seed;
        slot.record.batch_index = i / cfg.batch_size;
        slot.record.accepted = slot.accepted;
      } catch (...) {
        slot.error = std::current_exception();
      }
      slot.done = true;
      {
        std::lock_guard lock(mu);
        slots[i] = std::move(slot);
      }
      cv.notify_all();
    }
  };

  std::vector<std::thread> pool;
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(workers, count));
  for (std::size_t k = 0; k < n_workers; ++k) pool.emplace_back(work);

  BatchSummary summary;
  summary.requested = count;
  std::exception_ptr first_error;
  {
    io::ManifestWriter manifest(out / "manifest.jsonl");
    io::ManifestWriter exhausted(out / "exhausted.jsonl");
    for (std::size_t i = 0; i < count; ++i) {
      Slot slot;
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return slots[i].done; });
        slot = std::move(slots[i]);
      }
      if (slot.error) {
        if (!first_error) first_error = slot.error;
        continue;
      }
      if (first_error) continue;
      summary.total_attempts += slot.record.attempts;
      if (slot.accepted) {
        ++summary.accepted;
        manifest.append(io::to_json(slot.record), i);
      } else {
        ++summary.exhausted;
        exhausted.append({{"episode_index", i}, {"seed", seed}, {"attempts", slot.record.attempts},
                          {"reason", slot.failure}},
                         i);
      }
      if (progress) progress(i + 1, count);
    }
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

}  // namespace oprior
