#include "cdlc/synth.hpp"

#include "cdlc/error.hpp"
#include "cdlc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cdlc {

namespace {

double dot(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += a[j] * b[j];
    return s;
}

/// Largest-remainder allocation of n samples to proportions p.
std::vector<std::size_t> allocate_counts(std::size_t n, const std::vector<double>& p) {
    const std::size_t k = p.size();
    std::vector<std::size_t> counts(k);
    std::vector<std::pair<double, std::size_t>> remainders(k);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double exact = p[i] * double(n);
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += counts[i];
        remainders[i] = {exact - std::floor(exact), i};
    }
    // Largest fractional part first; ties to the lowest index.
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t j = 0; assigned < n; ++j, ++assigned) ++counts[remainders[j % k].second];
    return counts;
}

} // namespace

PlantedData generate_planted(const PlantedSpec& spec) {
    spec.validate();
    const std::size_t k = spec.k_true, d = spec.d, n = spec.n;
    Rng rng(spec.seed);

    // Orthonormal planted directions via Gram-Schmidt on Gaussian draws.
    std::vector<double> dirs(k * d);
    for (std::size_t c = 0; c < k; ++c) {
        double* v = dirs.data() + c * d;
        while (true) {
            for (std::size_t j = 0; j < d; ++j) v[j] = rng.normal();
            for (std::size_t p = 0; p < c; ++p) {
                const double proj = dot(v, dirs.data() + p * d, d);
                for (std::size_t j = 0; j < d; ++j) v[j] -= proj * dirs[p * d + j];
            }
            const double norm = std::sqrt(dot(v, v, d));
            if (norm > 1e-9) {
                for (std::size_t j = 0; j < d; ++j) v[j] /= norm;
                break;
            }
        }
    }

    const std::vector<double> mixing =
        spec.mixing.empty() ? std::vector<double>(k, 1.0 / double(k)) : spec.mixing;
    const auto counts = allocate_counts(n, mixing);

    PlantedData out;
    out.points.n = n;
    out.points.d = d;
    out.points.data.resize(n * d);
    out.points.source_norms.resize(n);
    out.points.ids.reserve(n);
    out.labels.reserve(n);

    std::size_t row = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const double* dir = dirs.data() + c * d;
        for (std::size_t s = 0; s < counts[c]; ++s, ++row) {
            double* p = out.points.data.data() + row * d;
            if (spec.noise_sigma == 0.0) {
                std::copy_n(dir, d, p);
                out.points.source_norms[row] = 1.0;
            } else {
                for (std::size_t j = 0; j < d; ++j) p[j] = dir[j] + spec.noise_sigma * rng.normal();
                const double norm = std::sqrt(dot(p, p, d));
                for (std::size_t j = 0; j < d; ++j) p[j] /= norm;
                out.points.source_norms[row] = norm;
            }
            out.points.ids.push_back("s" + std::to_string(row));
            out.labels.push_back(static_cast<std::uint32_t>(c));
        }
    }

    out.truth.class_label = "planted";
    out.truth.k = k;
    out.truth.d = d;
    out.truth.directions = std::move(dirs);
    out.truth.provenance.seed = spec.seed;
    out.truth.provenance.n_samples = n;
    return out;
}

ExhaustiveResult exhaustive_kmeans(const UnitMatrix& points, std::size_t k) {
    const std::size_t n = points.n, d = points.d;
    if (k < 1 || n < k) fail(Errc::too_few_points, "need N >= k >= 1");

    double combos = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        combos *= double(k);
        if (combos > 1e7)
            fail(Errc::instance_too_large,
                 "k^N exceeds 1e7 for N=" + std::to_string(n) + ", k=" + std::to_string(k));
    }

    std::vector<std::uint32_t> assign(n, 0);
    std::vector<double> sums(k * d);
    std::vector<std::size_t> counts(k);
    ExhaustiveResult best;
    best.best_objective = -std::numeric_limits<double>::infinity();

    const std::uint64_t total = static_cast<std::uint64_t>(combos);
    for (std::uint64_t code = 0; code < total; ++code) {
        std::uint64_t c = code;
        for (std::size_t i = 0; i < n; ++i) {
            assign[i] = static_cast<std::uint32_t>(c % k);
            c /= k;
        }
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) ++counts[assign[i]];
        if (std::find(counts.begin(), counts.end(), std::size_t{0}) != counts.end())
            continue; // only surjective assignments

        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = points.row(i).data();
            double* s = sums.data() + assign[i] * d;
            for (std::size_t j = 0; j < d; ++j) s[j] += xi[j];
        }
        double objective = 0.0;
        for (std::size_t g = 0; g < k; ++g)
            objective += std::sqrt(dot(sums.data() + g * d, sums.data() + g * d, d));

        if (objective > best.best_objective) {
            best.best_objective = objective;
            best.best_assignment = assign;
        }
    }
    return best;
}

MatchResult match_directions(const DirectionSet& recovered, const DirectionSet& truth) {
    if (recovered.k != truth.k)
        fail(Errc::k_mismatch, "recovered K=" + std::to_string(recovered.k) +
                                   " vs truth K=" + std::to_string(truth.k));
    if (recovered.d != truth.d) fail(Errc::dim_mismatch, "direction dimensions differ");
    const std::size_t k = recovered.k, d = recovered.d;

    std::vector<bool> rec_used(k, false), truth_used(k, false);
    MatchResult res;
    res.permutation.assign(k, 0);
    res.min_cosine = std::numeric_limits<double>::infinity();

    for (std::size_t step = 0; step < k; ++step) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < k; ++i) {
            if (rec_used[i]) continue;
            for (std::size_t j = 0; j < k; ++j) {
                if (truth_used[j]) continue;
                const double cs = dot(recovered.direction(i).data(), truth.direction(j).data(), d);
                if (cs > best) {
                    best = cs;
                    bi = i;
                    bj = j;
                }
            }
        }
        rec_used[bi] = true;
        truth_used[bj] = true;
        res.permutation[bi] = bj;
        res.min_cosine = std::min(res.min_cosine, best);
    }
    return res;
}

} // namespace cdlc
