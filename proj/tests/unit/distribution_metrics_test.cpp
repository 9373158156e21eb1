#include "cdlc/distribution_metrics.hpp"

#include "cdlc/error.hpp"
#include "cdlc/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace cdlc;
using testutil::make_latent;

namespace {

GaussianStats diagonal_stats(const std::vector<double>& mu, const std::vector<double>& var) {
    GaussianStats s;
    s.dim = mu.size();
    s.n = 100;
    s.mu = mu;
    s.sigma.assign(s.dim * s.dim, 0.0);
    for (std::size_t j = 0; j < s.dim; ++j) s.sigma[j * s.dim + j] = var[j];
    return s;
}

} // namespace

TEST_CASE("gaussian_stats") {
    SUBCASE("two points on one axis") {
        const GaussianStats s = gaussian_stats(make_latent(2, 2, {0, 0, 2, 0}));
        CHECK(s.mu[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(s.mu[1] == 0.0);
        CHECK(s.sigma[0] == doctest::Approx(2.0).epsilon(1e-12)); // unbiased: (1+1)/(2-1)
        CHECK(s.sigma[1] == 0.0);
        CHECK(s.sigma[3] == 0.0);
    }

    SUBCASE("identical rows give a zero covariance") {
        const GaussianStats s =
            gaussian_stats(make_latent(5, 3, std::vector<float>(15, 0.37f)));
        for (double v : s.sigma) CHECK(v == 0.0);
    }

    SUBCASE("large sample approaches the generating diagonal") {
        Rng rng(12);
        const std::size_t n = 500, d = 4;
        const std::vector<double> true_mu = {1.0, -2.0, 0.0, 3.0};
        const std::vector<double> true_sd = {0.5, 1.0, 0.8, 0.25};
        std::vector<float> values(n * d);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j)
                values[i * d + j] = static_cast<float>(true_mu[j] + true_sd[j] * rng.normal());
        const GaussianStats s = gaussian_stats(make_latent(n, d, values));
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) {
                const double expected = a == b ? true_sd[a] * true_sd[a] : 0.0;
                CHECK(std::abs(s.sigma[a * d + b] - expected) < 0.15);
            }
        validate_stats(s);
    }

    SUBCASE("fewer than two samples is an error") {
        try {
            gaussian_stats(make_latent(1, 2, {1, 2}));
            FAIL("expected TooFewSamples");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::too_few_samples);
        }
    }
}

TEST_CASE("frechet_distance") {
    SUBCASE("identical stats are at distance zero") {
        Rng rng(4);
        std::vector<float> values(30 * 3);
        for (auto& v : values) v = static_cast<float>(rng.normal());
        const GaussianStats s = gaussian_stats(make_latent(30, 3, values));
        CHECK(frechet_distance(s, s) == doctest::Approx(0.0).epsilon(1e-8));
    }

    SUBCASE("unit-variance 1-D Gaussians a mean apart score exactly 1") {
        const GaussianStats a = diagonal_stats({0.0}, {1.0});
        const GaussianStats b = diagonal_stats({1.0}, {1.0});
        CHECK(frechet_distance(a, b) == doctest::Approx(1.0).epsilon(1e-8));
    }

    SUBCASE("diagonal cases match the closed form") {
        Rng rng(9);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> mu1(3), mu2(3), v1(3), v2(3);
            for (std::size_t j = 0; j < 3; ++j) {
                mu1[j] = rng.normal() * 2.0;
                mu2[j] = rng.normal() * 2.0;
                v1[j] = 0.1 + 3.0 * rng.uniform();
                v2[j] = 0.1 + 3.0 * rng.uniform();
            }
            const GaussianStats a = diagonal_stats(mu1, v1);
            const GaussianStats b = diagonal_stats(mu2, v2);
            const double expected = oracle::frechet_diagonal(mu1, v1, mu2, v2);
            CHECK(frechet_distance(a, b) == doctest::Approx(expected).epsilon(1e-8));
            CHECK(std::abs(frechet_distance(a, b) - frechet_distance(b, a)) <= 1e-8);
        }
    }

    SUBCASE("full-covariance symmetry") {
        Rng rng(14);
        std::vector<float> va(40 * 3), vb(40 * 3);
        for (auto& v : va) v = static_cast<float>(rng.normal());
        for (auto& v : vb) v = static_cast<float>(rng.normal() * 1.5 + 0.3);
        const GaussianStats a = gaussian_stats(make_latent(40, 3, va));
        const GaussianStats b = gaussian_stats(make_latent(40, 3, vb));
        CHECK(std::abs(frechet_distance(a, b) - frechet_distance(b, a)) <= 1e-8);
        CHECK(frechet_distance(a, b) >= 0.0);
    }

    SUBCASE("rotating both feature sets leaves the distance unchanged") {
        Rng rng(25);
        const std::size_t n = 60, d = 3;
        std::vector<float> va(n * d), vb(n * d);
        for (auto& v : va) v = static_cast<float>(rng.normal());
        for (auto& v : vb) v = static_cast<float>(rng.normal() * 0.7 + 1.0);

        // A fixed rotation about the z axis then the x axis.
        const double c1 = std::cos(0.7), s1 = std::sin(0.7);
        const double c2 = std::cos(1.3), s2 = std::sin(1.3);
        auto rotate = [&](std::vector<float> v) {
            for (std::size_t i = 0; i < n; ++i) {
                double x = v[i * 3], y = v[i * 3 + 1], z = v[i * 3 + 2];
                double x1 = c1 * x - s1 * y, y1 = s1 * x + c1 * y;
                double y2 = c2 * y1 - s2 * z, z2 = s2 * y1 + c2 * z;
                v[i * 3] = float(x1);
                v[i * 3 + 1] = float(y2);
                v[i * 3 + 2] = float(z2);
            }
            return v;
        };
        const double before = frechet_distance(gaussian_stats(make_latent(n, d, va)),
                                               gaussian_stats(make_latent(n, d, vb)));
        const double after = frechet_distance(gaussian_stats(make_latent(n, d, rotate(va))),
                                              gaussian_stats(make_latent(n, d, rotate(vb))));
        CHECK(after == doctest::Approx(before).epsilon(1e-6));
    }

    SUBCASE("indefinite covariance is rejected") {
        GaussianStats bad = diagonal_stats({0.0, 0.0}, {1.0, -0.5});
        const GaussianStats ok = diagonal_stats({0.0, 0.0}, {1.0, 1.0});
        try {
            frechet_distance(bad, ok);
            FAIL("expected NotPSD");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::not_psd);
        }
    }

    SUBCASE("dimension mismatch is rejected") {
        const GaussianStats a = diagonal_stats({0.0}, {1.0});
        const GaussianStats b = diagonal_stats({0.0, 0.0}, {1.0, 1.0});
        CHECK_THROWS_AS(frechet_distance(a, b), Error);
    }
}
