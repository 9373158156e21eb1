#pragma once

#include "cdlc/types.hpp"

#include <functional>
#include <map>

namespace cdlc {

struct KmeansOptions {
    std::size_t restarts = 10;
    std::size_t max_iter = 300;
    double tol = 1e-9; // minimum objective improvement to keep iterating
    unsigned threads = 1;
    /// Receives (restart index, per-iteration objective log) for every
    /// restart, not just the winner. Used by invariant checks.
    std::function<void(std::size_t, const std::vector<double>&)> trace;
};

/// Spherical K-means over unit rows: k-means++ seeding under cosine distance
/// d(x,y) = 1 - <x,y>, assignment to the center of maximal dot product (ties
/// to the lowest center index), centers re-normalized member means. Returns
/// the best-objective model over `restarts` independent seeded runs. Results
/// are bit-identical for a fixed (points, k, seed, options) regardless of
/// thread count.
ClusterModel spherical_kmeans(const UnitMatrix& points, std::size_t k, std::uint64_t seed,
                              const KmeansOptions& opts = {});

/// Mean silhouette with cosine distance. Singleton-cluster points contribute
/// 0; a point with a == b == 0 contributes 0.
double silhouette_cosine(const UnitMatrix& points, const std::vector<std::uint32_t>& assignments,
                         unsigned threads = 1);

struct SelectKResult {
    std::size_t k_star = 0;
    std::map<std::size_t, ClusterModel> models; // one entry per candidate k
};

/// Clusters for every k in [k_min, k_max] and picks the k with the highest
/// silhouette (ties to the smaller k). All models are returned for ablation
/// reporting; each carries its silhouette.
SelectKResult select_k(const UnitMatrix& points, std::size_t k_min, std::size_t k_max,
                       std::uint64_t seed, const KmeansOptions& opts = {});

/// Copies the model's centers into a DirectionSet for `class_label`,
/// preserving order and recording provenance.
DirectionSet extract_directions(const ClusterModel& model, const std::string& class_label);

} // namespace cdlc
