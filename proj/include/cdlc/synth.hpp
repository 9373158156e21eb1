#pragma once

#include "cdlc/types.hpp"

namespace cdlc {

struct PlantedData {
    UnitMatrix points;
    DirectionSet truth;
    std::vector<std::uint32_t> labels; // generating direction per point
};

/// Draws k_true orthonormal directions (seeded Gram-Schmidt on Gaussian
/// vectors), allocates samples to clusters by largest remainder on the
/// mixing proportions, and emits normalize(direction + noise_sigma * g) per
/// sample. Deterministic in the spec.
PlantedData generate_planted(const PlantedSpec& spec);

struct ExhaustiveResult {
    double best_objective = 0.0;
    std::vector<std::uint32_t> best_assignment;
};

/// Enumerates every surjective assignment of N points into k clusters and
/// maximizes the cosine objective (the best center per member set is the
/// re-normalized sum, so a set contributes the norm of its sum). Guarded by
/// k^N <= 1e7.
ExhaustiveResult exhaustive_kmeans(const UnitMatrix& points, std::size_t k);

struct MatchResult {
    std::vector<std::size_t> permutation; // permutation[i] = truth index for recovered i
    double min_cosine = 0.0;
};

/// Greedy maximum-cosine bipartite matching without replacement. Good enough
/// at small K with near-orthogonal truths; not an optimal assignment.
MatchResult match_directions(const DirectionSet& recovered, const DirectionSet& truth);

} // namespace cdlc
