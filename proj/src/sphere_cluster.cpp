#include "cdlc/sphere_cluster.hpp"

#include "cdlc/error.hpp"
#include "cdlc/parallel.hpp"
#include "cdlc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cdlc {

namespace {

double dot(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += a[j] * b[j];
    return s;
}

struct RunResult {
    std::vector<std::uint32_t> assignments;
    std::vector<double> centers;
    double objective = -std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    std::vector<double> objective_log;
};

/// k-means++ seeding adapted to cosine distance: the first center is a
/// uniformly drawn point, each further center is drawn with probability
/// proportional to (1 - best dot so far)^2. Prefix-sum sampling walks points
/// in index order, so the draw is reproducible.
std::vector<double> init_centers(const UnitMatrix& x, std::size_t k, Rng& rng, unsigned threads) {
    const std::size_t n = x.n, d = x.d;
    std::vector<double> centers(k * d);
    std::vector<double> best_dot(n, -std::numeric_limits<double>::infinity());

    std::size_t first = static_cast<std::size_t>(rng.below(n));
    std::copy_n(x.row(first).data(), d, centers.begin());

    for (std::size_t c = 1; c <= k; ++c) {
        const double* just_added = centers.data() + (c - 1) * d;
        parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i)
                best_dot[i] = std::max(best_dot[i], dot(x.row(i).data(), just_added, d));
        });
        if (c == k) break;

        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dist = std::max(0.0, 1.0 - best_dot[i]);
            total += dist * dist;
        }
        std::size_t pick;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                const double dist = std::max(0.0, 1.0 - best_dot[i]);
                acc += dist * dist;
                if (acc > r) {
                    pick = i;
                    break;
                }
            }
        } else {
            // Every point coincides with a chosen center; any index works.
            pick = static_cast<std::size_t>(rng.below(n));
        }
        std::copy_n(x.row(pick).data(), d, centers.begin() + c * d);
    }
    return centers;
}

RunResult run_once(const UnitMatrix& x, std::size_t k, Rng rng, const KmeansOptions& opts) {
    const std::size_t n = x.n, d = x.d;
    RunResult res;
    res.centers = init_centers(x, k, rng, opts.threads);
    res.assignments.assign(n, 0);

    std::vector<double> sums(k * d);
    std::vector<std::size_t> counts(k);
    double prev_objective = -std::numeric_limits<double>::infinity();

    std::vector<std::uint32_t> prev_assign;
    for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
        // Assignment: maximal dot product, ties to the lowest center index.
        // Workers write disjoint rows; no cross-point reduction happens here.
        prev_assign = res.assignments;
        parallel_for(n, opts.threads, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const double* xi = x.row(i).data();
                std::uint32_t best = 0;
                double best_val = dot(xi, res.centers.data(), d);
                for (std::size_t c = 1; c < k; ++c) {
                    const double v = dot(xi, res.centers.data() + c * d, d);
                    if (v > best_val) {
                        best_val = v;
                        best = static_cast<std::uint32_t>(c);
                    }
                }
                res.assignments[i] = best;
            }
        });
        bool changed = iter == 0 || prev_assign != res.assignments;

        // Member sums in fixed point order, so results are thread-count
        // independent and bit-stable.
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t a = res.assignments[i];
            const double* xi = x.row(i).data();
            double* s = sums.data() + a * d;
            for (std::size_t j = 0; j < d; ++j) s[j] += xi[j];
            ++counts[a];
        }

        // Repair empty clusters and degenerate means: hand the cluster the
        // point with the lowest dot product to its current center, taken
        // from a cluster that can spare one. Two passes, then give up.
        auto cluster_norm = [&](std::size_t c) {
            return std::sqrt(dot(sums.data() + c * d, sums.data() + c * d, d));
        };
        for (int attempt = 0; attempt < 2; ++attempt) {
            bool any_deficient = false;
            for (std::size_t c = 0; c < k; ++c) {
                if (counts[c] > 0 && cluster_norm(c) > 1e-12) continue;
                any_deficient = true;
                std::size_t steal = n;
                double steal_val = std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < n; ++i) {
                    const std::uint32_t a = res.assignments[i];
                    if (a == c || counts[a] < 2) continue;
                    const double v = dot(x.row(i).data(), res.centers.data() + a * d, d);
                    if (v < steal_val) {
                        steal_val = v;
                        steal = i;
                    }
                }
                if (steal == n) {
                    if (attempt == 1)
                        fail(Errc::degenerate_mean,
                             "cluster " + std::to_string(c) + " cannot be repaired");
                    continue;
                }
                const std::uint32_t from = res.assignments[steal];
                const double* xi = x.row(steal).data();
                for (std::size_t j = 0; j < d; ++j) {
                    sums[from * d + j] -= xi[j];
                    sums[c * d + j] += xi[j];
                }
                --counts[from];
                ++counts[c];
                res.assignments[steal] = static_cast<std::uint32_t>(c);
                changed = true;
            }
            if (!any_deficient) break;
            if (attempt == 1) {
                for (std::size_t c = 0; c < k; ++c)
                    if (counts[c] == 0 || cluster_norm(c) <= 1e-12)
                        fail(Errc::degenerate_mean,
                             "cluster " + std::to_string(c) + " still degenerate after repair");
            }
        }

        // Update: centers are re-normalized member means. The objective
        // sum_i <x_i, center(a_i)> then equals sum_c ||sums_c||.
        double objective = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const double norm = cluster_norm(c);
            objective += norm;
            for (std::size_t j = 0; j < d; ++j) res.centers[c * d + j] = sums[c * d + j] / norm;
        }
        res.objective_log.push_back(objective);
        res.objective = objective;
        res.iterations = iter + 1;

        if (!changed) break;
        if (iter > 0 && objective - prev_objective < opts.tol) break;
        prev_objective = objective;
    }
    return res;
}

std::vector<double> pairwise_cosine_dists(const UnitMatrix& x, unsigned threads) {
    const std::size_t n = x.n, d = x.d;
    std::vector<double> dists(n * n);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            dists[i * n + i] = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                dists[i * n + j] = 1.0 - dot(x.row(i).data(), x.row(j).data(), d);
            }
        }
    });
    return dists;
}

double silhouette_from_dists(const std::vector<double>& dists, std::size_t n,
                             const std::vector<std::uint32_t>& assignments, unsigned threads) {
    if (n < 2) fail(Errc::too_few_points, "silhouette requires at least 2 points");
    std::uint32_t max_label = 0;
    for (auto a : assignments) max_label = std::max(max_label, a);
    const std::size_t k = std::size_t(max_label) + 1;
    std::vector<std::size_t> counts(k, 0);
    for (auto a : assignments) ++counts[a];
    std::size_t populated = 0;
    for (auto c : counts) populated += c > 0;
    if (populated < 2) fail(Errc::single_cluster, "silhouette requires at least 2 clusters");

    std::vector<double> scores(n, 0.0);
    parallel_for(n, threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> cluster_sum(k);
        for (std::size_t i = lo; i < hi; ++i) {
            const std::uint32_t own = assignments[i];
            if (counts[own] == 1) {
                scores[i] = 0.0; // singleton convention
                continue;
            }
            std::fill(cluster_sum.begin(), cluster_sum.end(), 0.0);
            const double* row = dists.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) cluster_sum[assignments[j]] += row[j];
            const double a = cluster_sum[own] / double(counts[own] - 1); // row[i] is 0
            double b = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                if (c == own || counts[c] == 0) continue;
                b = std::min(b, cluster_sum[c] / double(counts[c]));
            }
            const double denom = std::max(a, b);
            scores[i] = denom > 0.0 ? (b - a) / denom : 0.0;
        }
    });
    double total = 0.0;
    for (double s : scores) total += s;
    return total / double(n);
}

} // namespace

ClusterModel spherical_kmeans(const UnitMatrix& points, std::size_t k, std::uint64_t seed,
                              const KmeansOptions& opts) {
    if (k < 1) fail(Errc::too_few_points, "k must be at least 1");
    if (points.n < k)
        fail(Errc::too_few_points,
             "N=" + std::to_string(points.n) + " points for k=" + std::to_string(k));
    const std::size_t restarts = std::max<std::size_t>(1, opts.restarts);

    RunResult best;
    bool have_best = false;
    for (std::size_t r = 0; r < restarts; ++r) {
        RunResult run = run_once(points, k, Rng(mix_seed(seed, r)), opts);
        if (opts.trace) opts.trace(r, run.objective_log);
        if (!have_best || run.objective > best.objective) {
            best = std::move(run);
            have_best = true;
        }
    }

    ClusterModel model;
    model.k = k;
    model.d = points.d;
    model.assignments = std::move(best.assignments);
    model.centers = std::move(best.centers);
    model.objective = best.objective;
    model.seed = seed;
    model.iterations = best.iterations;
    model.restarts_used = restarts;
    model.objective_log = std::move(best.objective_log);
    return model;
}

double silhouette_cosine(const UnitMatrix& points, const std::vector<std::uint32_t>& assignments,
                         unsigned threads) {
    if (assignments.size() != points.n)
        fail(Errc::shape_mismatch, "assignment count != point count");
    const auto dists = pairwise_cosine_dists(points, threads);
    return silhouette_from_dists(dists, points.n, assignments, threads);
}

SelectKResult select_k(const UnitMatrix& points, std::size_t k_min, std::size_t k_max,
                       std::uint64_t seed, const KmeansOptions& opts) {
    if (k_min < 2) fail(Errc::bad_config, "select_k requires k_min >= 2");
    if (k_min > k_max) fail(Errc::bad_config, "select_k requires k_min <= k_max");
    if (points.n < 2 || k_max > points.n - 1)
        fail(Errc::too_few_points, "select_k requires k_max <= N-1");

    const auto dists = pairwise_cosine_dists(points, opts.threads);
    SelectKResult res;
    double best_sil = -std::numeric_limits<double>::infinity();
    for (std::size_t k = k_min; k <= k_max; ++k) {
        ClusterModel model = spherical_kmeans(points, k, seed, opts);
        model.silhouette = silhouette_from_dists(dists, points.n, model.assignments, opts.threads);
        model.has_silhouette = true;
        if (model.silhouette > best_sil) {
            best_sil = model.silhouette;
            res.k_star = k;
        }
        res.models.emplace(k, std::move(model));
    }
    return res;
}

DirectionSet extract_directions(const ClusterModel& model, const std::string& class_label) {
    DirectionSet ds;
    ds.class_label = class_label;
    ds.k = model.k;
    ds.d = model.d;
    ds.directions = model.centers;
    ds.provenance.seed = model.seed;
    ds.provenance.silhouette = model.silhouette;
    ds.provenance.has_silhouette = model.has_silhouette;
    ds.provenance.n_samples = model.assignments.size();
    return ds;
}

} // namespace cdlc
