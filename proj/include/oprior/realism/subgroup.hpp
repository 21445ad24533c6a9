// SPDX-License-Identifier: Apache-2.0
//
// Categorical subgroup attribute with group-specific target effects.
#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "oprior/core/rng.hpp"
#include "oprior/core/stats.hpp"
#include "oprior/realism/preprocess.hpp"
#include "oprior/realism/table.hpp"

namespace oprior::realism {

enum class SubgroupEffect : std::uint8_t { intercepts, projection, interaction };

inline std::string_view to_string(SubgroupEffect e) {
  switch (e) {
    case SubgroupEffect::intercepts: return "intercepts";
    case SubgroupEffect::projection: return "projection";
    case SubgroupEffect::interaction: return "interaction";
  }
  return "intercepts";
}

struct SubgroupPlan {
  std::size_t groups = 2;
  std::vector<double> probabilities;
  SubgroupEffect effect = SubgroupEffect::intercepts;
  std::vector<double> effects;       // per group: intercept, projected offset, or slope
  std::size_t interaction_column = 0;
  double interaction_mean = 0.0;     // support moments of the interaction column
  double interaction_std = 1.0;
  std::vector<std::size_t> assignment;  // g_t in 1..G, filled by apply
  bool operator==(const SubgroupPlan&) const = default;
};

/// G in 2..5, balanced or Dirichlet(1) probabilities, effects of scale
/// U[0.2, 1]. Projection effects are the group rows of a random G x 2 matrix
/// times a random 2-vector.
inline SubgroupPlan fit_subgroup(const WorkingTable& t, RngStream& rng) {
  SubgroupPlan p;
  p.groups = static_cast<std::size_t>(rng.integer(2, 5));
  if (rng.bernoulli(0.5)) {
    p.probabilities.assign(p.groups, 1.0 / static_cast<double>(p.groups));
  } else {
    p.probabilities = rng.dirichlet(p.groups, 1.0);
  }
  p.effect = static_cast<SubgroupEffect>(rng.below(3));
  const double scale = rng.uniform(0.2, 1.0);
  p.effects.assign(p.groups, 0.0);
  if (p.effect == SubgroupEffect::projection) {
    const double u0 = rng.normal();
    const double u1 = rng.normal();
    for (auto& e : p.effects) e = scale * (rng.normal() * u0 + rng.normal() * u1) / std::sqrt(2.0);
  } else {
    for (auto& e : p.effects) e = scale * rng.normal();
  }
  if (t.cols() > 0) {
    p.interaction_column = static_cast<std::size_t>(rng.below(t.cols()));
    const auto support = support_of(t.x[p.interaction_column], t.support());
    p.interaction_mean = stats::mean(support);
    p.interaction_std = std::max(stats::stddev(support), kSigmaFloor);
  } else if (p.effect == SubgroupEffect::interaction) {
    p.effect = SubgroupEffect::intercepts;
  }
  return p;
}

/// Draws g_t row by row, adds the group effect to the target (the latent
/// score for classification) and appends the group column.
inline SubgroupPlan apply_subgroup(SubgroupPlan p, WorkingTable& t, RngStream rng) {
  Column& target = t.classification() ? t.latent : t.y;
  p.assignment.resize(t.rows());
  Column group(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const std::size_t g = rng.categorical(p.probabilities);
    p.assignment[r] = g + 1;
    group[r] = static_cast<double>(g + 1);
    double delta = p.effects[g];
    if (p.effect == SubgroupEffect::interaction) {
      delta *= (t.x[p.interaction_column][r] - p.interaction_mean) / p.interaction_std;
    }
    target[r] += delta;
  }
  ColumnMeta m;
  m.semantic_type = SemanticType::categorical_subgroup;
  m.provenance = Provenance::subgroup;
  m.levels = p.groups;
  t.append_column(std::move(group), m);
  return p;
}

}  // namespace oprior::realism
