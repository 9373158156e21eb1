#include "cdlc/concept_metrics.hpp"

#include "cdlc/error.hpp"

#include <algorithm>
#include <cmath>

namespace cdlc {

EffectTable effect_table(const ProbTable& baseline, const std::vector<ProbTable>& per_concept,
                         const std::string& target) {
    if (per_concept.empty()) fail(Errc::empty_concept_list, "no manipulated tables supplied");
    const std::size_t t = baseline.class_index(target);

    EffectTable out;
    out.ids = baseline.ids;
    out.n = baseline.n;
    out.k = per_concept.size();
    out.effects.resize(out.n * out.k);

    for (std::size_t k = 0; k < per_concept.size(); ++k) {
        const ProbTable& m = per_concept[k];
        if (m.ids != baseline.ids)
            fail(Errc::id_mismatch, "concept " + std::to_string(k) + " table ids differ from baseline");
        if (m.classes != baseline.classes)
            fail(Errc::id_mismatch,
                 "concept " + std::to_string(k) + " table classes differ from baseline");
        for (std::size_t i = 0; i < out.n; ++i)
            out.effects[i * out.k + k] = m.at(i, t) - baseline.at(i, t);
    }
    out.validate();
    return out;
}

double coverage(const EffectTable& t, double delta) {
    if (!(delta > 0.0)) fail(Errc::bad_config, "coverage threshold delta must be positive");
    if (t.n == 0) return 0.0;
    std::size_t covered = 0;
    for (std::size_t i = 0; i < t.n; ++i) {
        double best = t.at(i, 0);
        for (std::size_t k = 1; k < t.k; ++k) best = std::max(best, t.at(i, k));
        if (best >= delta) ++covered;
    }
    return double(covered) / double(t.n);
}

double best_of_k(const EffectTable& t) {
    double total = 0.0;
    for (std::size_t i = 0; i < t.n; ++i) {
        double best = t.at(i, 0);
        for (std::size_t k = 1; k < t.k; ++k) best = std::max(best, t.at(i, k));
        total += best;
    }
    return total / double(t.n);
}

double top_q_mean(const EffectTable& t, double q) {
    if (!(q > 0.0 && q <= 1.0)) fail(Errc::bad_config, "q must lie in (0, 1]");
    // Tiny slack keeps ceil() off spurious fp excess for exact products.
    const std::size_t m = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(q * double(t.k) - 1e-12)), 1, t.k);
    std::vector<double> row(t.k);
    double total = 0.0;
    for (std::size_t i = 0; i < t.n; ++i) {
        for (std::size_t k = 0; k < t.k; ++k) row[k] = t.at(i, k);
        std::partial_sort(row.begin(), row.begin() + m, row.end(), std::greater<>());
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k) s += row[k];
        total += s / double(m);
    }
    return total / double(t.n);
}

double redundancy(const DirectionSet& ds) {
    if (ds.k < 2) fail(Errc::single_direction, "redundancy requires at least 2 directions");
    double total = 0.0;
    for (std::size_t i = 0; i < ds.k; ++i) {
        const auto a = ds.direction(i);
        for (std::size_t j = i + 1; j < ds.k; ++j) {
            const auto b = ds.direction(j);
            double s = 0.0;
            for (std::size_t x = 0; x < ds.d; ++x) s += a[x] * b[x];
            total += s;
        }
    }
    return 2.0 * total / (double(ds.k) * double(ds.k - 1));
}

std::vector<std::size_t> best_concept_per_sample(const EffectTable& t) {
    std::vector<std::size_t> out(t.n, 0);
    for (std::size_t i = 0; i < t.n; ++i) {
        double best = t.at(i, 0);
        for (std::size_t k = 1; k < t.k; ++k) {
            if (t.at(i, k) > best) {
                best = t.at(i, k);
                out[i] = k;
            }
        }
    }
    return out;
}

} // namespace cdlc
