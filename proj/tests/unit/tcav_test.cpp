#include "cdlc/tcav.hpp"

#include "cdlc/report.hpp"

#include "cdlc/error.hpp"
#include "cdlc/rng.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace cdlc;
using testutil::make_latent;

namespace {

/// Mirrored pairs around a known separating normal: concept rows at
/// +gamma*n plus orthogonal noise, negatives at -gamma*n with the same
/// noise. The logistic fit then recovers the normal almost exactly.
struct SeparableFixture {
    std::size_t n = 24, d = 12;
    std::vector<double> normal;
    LatentMatrix concept_acts, negative_acts;

    explicit SeparableFixture(std::uint64_t seed, double gamma = 1.0) {
        Rng rng(seed);
        normal.resize(d);
        double norm = 0.0;
        for (auto& v : normal) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (auto& v : normal) v /= norm;

        std::vector<float> pos(n * d), neg(n * d);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> noise(d);
            double proj = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                noise[j] = 0.5 * rng.normal();
                proj += noise[j] * normal[j];
            }
            for (std::size_t j = 0; j < d; ++j) {
                noise[j] -= proj * normal[j]; // keep the noise orthogonal
                pos[i * d + j] = static_cast<float>(gamma * normal[j] + noise[j]);
                neg[i * d + j] = static_cast<float>(-gamma * normal[j] + noise[j]);
            }
        }
        concept_acts = make_latent(n, d, pos, "pos");
        negative_acts = make_latent(n, d, neg, "neg");
    }
};

} // namespace

TEST_CASE("fit_cav recovers a planted separating normal") {
    SeparableFixture fx(51);
    const CavModel cav = fit_cav(fx.concept_acts, fx.negative_acts);
    CHECK(cav.train_accuracy == 1.0);
    CHECK_FALSE(cav.degenerate);
    double align = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < fx.d; ++j) {
        align += cav.v[j] * fx.normal[j];
        norm += cav.v[j] * cav.v[j];
    }
    CHECK(align > 0.99); // oriented toward the concept class
    CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-6);
}

TEST_CASE("fit_cav is deterministic") {
    SeparableFixture fx(52);
    const CavModel a = fit_cav(fx.concept_acts, fx.negative_acts, 1e-3, 7);
    const CavModel b = fit_cav(fx.concept_acts, fx.negative_acts, 1e-3, 7);
    CHECK(a.v == b.v);
    CHECK(a.train_accuracy == b.train_accuracy);
    CHECK(a.seed == 7);
}

TEST_CASE("identical concept and negative sets are inseparable") {
    Rng rng(6);
    std::vector<float> values(10 * 4);
    for (auto& v : values) v = static_cast<float>(rng.normal());
    const LatentMatrix acts = make_latent(10, 4, values);
    const CavModel cav = fit_cav(acts, acts);
    CHECK(cav.degenerate);
    CHECK(cav.train_accuracy == doctest::Approx(0.5).epsilon(0.01));
    double norm = 0.0;
    for (double v : cav.v) norm += v * v;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("all-identical activations are a typed error") {
    const LatentMatrix same = make_latent(4, 3, std::vector<float>(12, 1.0f), "a");
    const LatentMatrix same2 = make_latent(4, 3, std::vector<float>(12, 1.0f), "b");
    try {
        fit_cav(same, same2);
        FAIL("expected DegenerateData");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::degenerate_data);
    }
}

TEST_CASE("wide activations are accepted") {
    // Matches the widest extraction layer used in practice.
    const std::size_t d = 2048;
    Rng rng(77);
    std::vector<float> pos(6 * d), neg(6 * d);
    for (std::size_t i = 0; i < 6 * d; ++i) {
        pos[i] = static_cast<float>(rng.normal() + 1.0);
        neg[i] = static_cast<float>(rng.normal() - 1.0);
    }
    const CavModel cav = fit_cav(make_latent(6, d, pos, "p"), make_latent(6, d, neg, "n"));
    CHECK(cav.v.size() == d);
    CHECK(cav.train_accuracy == 1.0);
}

TEST_CASE("tcav_score") {
    CavModel cav;
    cav.v = {1.0, 0.0, 0.0};

    SUBCASE("perfectly aligned gradients score 1") {
        const LatentMatrix grads = make_latent(5, 3, {1, 0, 0, 2, 0, 0, 3, 1, 1, 1, -1, 0, 5, 0, 9});
        CHECK(tcav_score(grads, cav) == 1.0);
    }

    SUBCASE("exactly orthogonal gradients score 0 under the strict rule") {
        const LatentMatrix grads = make_latent(4, 3, {0, 1, 0, 0, -1, 2, 0, 0, 1, 0, 5, 5});
        CHECK(tcav_score(grads, cav) == 0.0);
    }

    SUBCASE("positive rescaling of rows never moves the score") {
        Rng rng(88);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t n = 3 + rng.below(10), d = 2 + rng.below(6);
            std::vector<float> g(n * d);
            for (auto& v : g) v = static_cast<float>(rng.normal());
            CavModel c;
            c.v.resize(d);
            double norm = 0.0;
            for (auto& v : c.v) {
                v = rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
            for (auto& v : c.v) v /= norm;

            const LatentMatrix grads = make_latent(n, d, g);
            const double base = tcav_score(grads, c);
            std::vector<float> scaled = g;
            for (std::size_t i = 0; i < n; ++i) {
                const float s = static_cast<float>(std::exp(3.0 * (rng.uniform() - 0.5)));
                for (std::size_t j = 0; j < d; ++j) scaled[i * d + j] *= s;
            }
            CHECK(tcav_score(make_latent(n, d, scaled), c) == base);
        }
    }

    SUBCASE("negation complements the score when no products are zero") {
        Rng rng(99);
        const std::size_t n = 40, d = 5;
        std::vector<float> g(n * d);
        for (auto& v : g) v = static_cast<float>(rng.normal() + 0.1);
        CavModel c;
        c.v.assign(d, 0.0);
        c.v[0] = 1.0;
        const LatentMatrix grads = make_latent(n, d, g);
        CavModel neg = c;
        neg.v[0] = -1.0;
        CHECK(tcav_score(grads, c) + tcav_score(grads, neg) <= 1.0);
        bool any_zero = false;
        for (std::size_t i = 0; i < n; ++i) any_zero = any_zero || grads.at(i, 0) == 0.0f;
        if (!any_zero)
            CHECK(tcav_score(grads, c) + tcav_score(grads, neg) == doctest::Approx(1.0));
    }

    SUBCASE("empty gradients are an error") {
        LatentMatrix empty;
        empty.n = 0;
        empty.d = 3;
        try {
            tcav_score(empty, cav);
            FAIL("expected EmptyGradients");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::empty_gradients);
        }
    }
}

TEST_CASE("tcav_runs") {
    SeparableFixture fx(61);
    // Gradients aligned with the planted normal.
    std::vector<float> g(8 * fx.d);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < fx.d; ++j)
            g[i * fx.d + j] = static_cast<float>((1.0 + 0.1 * double(i)) * fx.normal[j]);
    const LatentMatrix grads = make_latent(8, fx.d, g);

    // A pool wider than the concept set, so subsets vary per run.
    Rng rng(62);
    std::vector<float> pool_vals(64 * fx.d);
    for (std::size_t i = 0; i < pool_vals.size(); ++i)
        pool_vals[i] = static_cast<float>(rng.normal() - 1.5 * fx.normal[i % fx.d]);
    const LatentMatrix pool = make_latent(64, fx.d, pool_vals, "pool");

    SUBCASE("single run reports zero deviation by convention") {
        const TcavRuns r = tcav_runs(fx.concept_acts, pool, grads, 1, 5);
        CHECK(r.per_run.size() == 1);
        CHECK(r.std_dev == 0.0);
    }

    SUBCASE("aligned gradients give mean 1 and std 0") {
        const TcavRuns r = tcav_runs(fx.concept_acts, pool, grads, 6, 5);
        CHECK(r.mean == 1.0);
        CHECK(r.std_dev == 0.0);
        for (double s : r.per_run) CHECK(s == 1.0);
    }

    SUBCASE("deterministic in the master seed") {
        const TcavRuns a = tcav_runs(fx.concept_acts, pool, grads, 4, 9);
        const TcavRuns b = tcav_runs(fx.concept_acts, pool, grads, 4, 9);
        CHECK(a.per_run == b.per_run);
    }

    SUBCASE("insufficient negatives are rejected") {
        try {
            tcav_runs(fx.concept_acts, fx.negative_acts, grads, 3, 5);
            FAIL("expected InsufficientNegatives");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::insufficient_negatives);
        }
    }

    SUBCASE("per-layer runs flow into the layer table") {
        // Two concepts x two layers, each cell a mean +- std over runs.
        EvalReport report;
        for (const std::string name : {"first", "second"}) {
            for (const std::string layer : {"shallow", "deep"}) {
                const TcavRuns r = tcav_runs(fx.concept_acts, pool, grads, 4,
                                             name == "first" ? 1 : 2);
                report.tcav_layers.push_back({name, layer, r.mean, r.std_dev});
            }
        }
        const std::string md = tcav_table_markdown(report);
        CHECK(md.find("| Concept | shallow | deep |") == 0);
        CHECK(md.find("| first | 1.00±0.00 | 1.00±0.00 |") != std::string::npos);
        std::size_t lines = 0;
        for (char ch : md) lines += ch == '\n';
        CHECK(lines == 4); // header, rule, one row per concept
    }
}
