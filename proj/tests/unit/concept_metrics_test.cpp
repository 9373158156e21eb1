#include "cdlc/concept_metrics.hpp"

#include "cdlc/error.hpp"
#include "cdlc/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace cdlc;

namespace {

EffectTable table_3x2() {
    EffectTable t;
    t.ids = {"x1", "x2", "x3"};
    t.n = 3;
    t.k = 2;
    t.effects = {0.10, -0.20, 0.01, 0.02, 0.06, 0.00};
    return t;
}

ProbTable two_class(const std::vector<std::string>& ids, const std::vector<double>& target_probs) {
    ProbTable t;
    t.ids = ids;
    t.classes = {"other", "target"};
    t.n = ids.size();
    t.c = 2;
    for (double p : target_probs) {
        t.probs.push_back(1.0 - p);
        t.probs.push_back(p);
    }
    return t;
}

DirectionSet dirs_from(const std::vector<std::vector<double>>& rows) {
    DirectionSet ds;
    ds.class_label = "x";
    ds.k = rows.size();
    ds.d = rows.front().size();
    for (const auto& r : rows) ds.directions.insert(ds.directions.end(), r.begin(), r.end());
    return ds;
}

} // namespace

TEST_CASE("effect_table subtracts baselines per concept") {
    SUBCASE("no change gives the zero table") {
        const ProbTable base = two_class({"a", "b"}, {0.3, 0.7});
        const EffectTable t = effect_table(base, {base, base}, "target");
        for (double e : t.effects) CHECK(e == 0.0);
    }

    SUBCASE("single entry direct subtraction") {
        const ProbTable base = two_class({"a"}, {0.30});
        const ProbTable up = two_class({"a"}, {0.45});
        const EffectTable t = effect_table(base, {up}, "target");
        CHECK(t.at(0, 0) == doctest::Approx(0.15).epsilon(1e-12));
    }

    SUBCASE("random case matches per-entry subtraction to 1e-12") {
        Rng rng(3);
        const std::vector<std::string> ids = {"a", "b", "c", "d", "e"};
        std::vector<double> base_p(5), m1(5), m2(5), m3(5);
        for (auto* v : {&base_p, &m1, &m2, &m3})
            for (auto& p : *v) p = 0.05 + 0.9 * rng.uniform();
        const ProbTable base = two_class(ids, base_p);
        const EffectTable t =
            effect_table(base, {two_class(ids, m1), two_class(ids, m2), two_class(ids, m3)},
                         "target");
        const std::vector<const std::vector<double>*> ms = {&m1, &m2, &m3};
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t k = 0; k < 3; ++k)
                CHECK(t.at(i, k) == doctest::Approx((*ms[k])[i] - base_p[i]).epsilon(1e-12));
    }

    SUBCASE("errors") {
        const ProbTable base = two_class({"a"}, {0.5});
        CHECK_THROWS_AS(effect_table(base, {}, "target"), Error);
        ProbTable other = base;
        other.ids = {"b"};
        try {
            effect_table(base, {other}, "target");
            FAIL("expected IdMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::id_mismatch);
        }
    }
}

TEST_CASE("coverage, best_of_k and top_q_mean on the pinned table") {
    const EffectTable t = table_3x2();

    CHECK(coverage(t, 0.05) == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(coverage(t, 10.0) == 0.0);
    CHECK(best_of_k(t) == doctest::Approx(0.06).epsilon(1e-12));
    // q=0.3 with K=2 collapses to the best concept.
    CHECK(top_q_mean(t, 0.3) == doctest::Approx(best_of_k(t)).epsilon(1e-12));

    SUBCASE("q = 1 is the plain mean") {
        double mean = 0.0;
        for (double e : t.effects) mean += e;
        mean /= double(t.effects.size());
        CHECK(top_q_mean(t, 1.0) == doctest::Approx(mean).epsilon(1e-12));
    }

    SUBCASE("all-negative tables keep their sign") {
        EffectTable neg = t;
        for (double& e : neg.effects) e = -std::abs(e) - 0.01;
        CHECK(best_of_k(neg) < 0.0);
    }
}

TEST_CASE("metric invariants on random tables") {
    Rng rng(19);
    for (int trial = 0; trial < 20; ++trial) {
        EffectTable t;
        t.n = 2 + rng.below(6);
        t.k = 1 + rng.below(5);
        t.effects.resize(t.n * t.k);
        for (auto& e : t.effects) e = rng.uniform() * 2.0 - 1.0;
        for (std::size_t i = 0; i < t.n; ++i) t.ids.push_back("s" + std::to_string(i));

        // Coverage never increases with delta.
        double prev = 1.0;
        for (double delta : {0.01, 0.05, 0.2, 0.5, 0.9}) {
            const double c = coverage(t, delta);
            CHECK(c <= prev + 1e-15);
            prev = c;
        }

        // Order statistics dominate: best >= top-q >= full mean.
        double mean = 0.0;
        for (double e : t.effects) mean += e;
        mean /= double(t.effects.size());
        const double q = 0.05 + 0.95 * rng.uniform();
        CHECK(best_of_k(t) >= top_q_mean(t, q) - 1e-12);
        CHECK(top_q_mean(t, q) >= mean - 1e-12);

        // Concept permutation leaves sample metrics unchanged.
        EffectTable shuffled = t;
        std::vector<std::size_t> perm(t.k);
        for (std::size_t k = 0; k < t.k; ++k) perm[k] = k;
        for (std::size_t k = t.k; k > 1; --k)
            std::swap(perm[k - 1], perm[rng.below(k)]);
        for (std::size_t i = 0; i < t.n; ++i)
            for (std::size_t k = 0; k < t.k; ++k)
                shuffled.effects[i * t.k + k] = t.at(i, perm[k]);
        CHECK(best_of_k(shuffled) == best_of_k(t));
        CHECK(coverage(shuffled, 0.05) == coverage(t, 0.05));
        CHECK(top_q_mean(shuffled, q) == doctest::Approx(top_q_mean(t, q)).epsilon(1e-12));

        // Sample permutation too (reverse the rows).
        EffectTable reversed = t;
        for (std::size_t i = 0; i < t.n; ++i)
            for (std::size_t k = 0; k < t.k; ++k)
                reversed.effects[i * t.k + k] = t.at(t.n - 1 - i, k);
        CHECK(best_of_k(reversed) == doctest::Approx(best_of_k(t)).epsilon(1e-12));
        CHECK(coverage(reversed, 0.05) == coverage(t, 0.05));
    }
}

TEST_CASE("redundancy") {
    SUBCASE("orthonormal axes score zero") {
        const DirectionSet ds = dirs_from({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
        CHECK(redundancy(ds) == doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("identical directions score one") {
        const DirectionSet ds = dirs_from({{1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}});
        CHECK(redundancy(ds) == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("antipodal pair scores minus one") {
        const DirectionSet ds = dirs_from({{1, 0}, {-1, 0}});
        CHECK(redundancy(ds) == doctest::Approx(-1.0).epsilon(1e-12));
    }

    SUBCASE("stays within [-1, 1] on random unit sets") {
        Rng rng(31);
        for (int trial = 0; trial < 10; ++trial) {
            const std::size_t k = 2 + rng.below(7), d = 2 + rng.below(10);
            std::vector<std::vector<double>> rows(k, std::vector<double>(d));
            for (auto& r : rows) {
                double norm = 0.0;
                for (auto& v : r) {
                    v = rng.normal();
                    norm += v * v;
                }
                norm = std::sqrt(norm);
                for (auto& v : r) v /= norm;
            }
            const double red = redundancy(dirs_from(rows));
            CHECK(red >= -1.0 - 1e-12);
            CHECK(red <= 1.0 + 1e-12);
        }
    }

    SUBCASE("a single direction is an error") {
        try {
            redundancy(dirs_from({{1, 0}}));
            FAIL("expected SingleDirection");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::single_direction);
        }
    }
}

TEST_CASE("best_concept_per_sample breaks ties to the lowest index") {
    EffectTable t;
    t.ids = {"a", "b"};
    t.n = 2;
    t.k = 3;
    t.effects = {0.5, 0.5, 0.1, 0.0, 0.3, 0.3};
    const auto best = best_concept_per_sample(t);
    CHECK(best == std::vector<std::size_t>{0, 1});
}
