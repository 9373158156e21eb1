#pragma once

#include "cdlc/types.hpp"

namespace cdlc {

/// effects[i][k] = manipulated_k[i, target] - baseline[i, target]. Every
/// table must share ids and class lists with the baseline.
EffectTable effect_table(const ProbTable& baseline, const std::vector<ProbTable>& per_concept,
                         const std::string& target);

/// Fraction of images where at least one concept reaches an effect >= delta.
double coverage(const EffectTable& t, double delta);

/// Mean over images of the largest per-concept effect. Not clamped; an
/// all-negative table yields a negative value.
double best_of_k(const EffectTable& t);

/// Mean over images of the average of the ceil(q*K) largest effects.
double top_q_mean(const EffectTable& t, double q);

/// Mean pairwise cosine similarity between distinct direction pairs.
double redundancy(const DirectionSet& directions);

/// Per-sample argmax concept (ties to the lowest index), for reporting.
std::vector<std::size_t> best_concept_per_sample(const EffectTable& t);

} // namespace cdlc
