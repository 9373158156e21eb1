#include "cdlc/distribution_metrics.hpp"

#include "cdlc/error.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace cdlc {

namespace {

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
as_matrix(const GaussianStats& s) {
    return {s.sigma.data(), static_cast<Eigen::Index>(s.dim), static_cast<Eigen::Index>(s.dim)};
}

/// Eigendecomposition with the shared clamping policy: an eigenvalue below
/// -1e-6 is a hard failure, [-1e-6, 0] clamps to zero.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> psd_eigen(const Eigen::MatrixXd& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    if (eig.info() != Eigen::Success) fail(Errc::not_psd, std::string(what) + ": eigendecomposition failed");
    Eigen::VectorXd values = eig.eigenvalues();
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values[i] < -1e-6)
            fail(Errc::not_psd, std::string(what) + ": eigenvalue " + std::to_string(values[i]) +
                                    " below -1e-6");
        if (values[i] < 0.0) values[i] = 0.0;
    }
    return {eig.eigenvectors(), std::move(values)};
}

} // namespace

GaussianStats gaussian_stats(const LatentMatrix& features) {
    if (features.n < 2)
        fail(Errc::too_few_samples,
             "need at least 2 samples, got " + std::to_string(features.n));
    const std::size_t n = features.n, d = features.d;

    GaussianStats s;
    s.dim = d;
    s.n = n;
    s.mu.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) s.mu[j] += double(features.at(i, j));
    for (std::size_t j = 0; j < d; ++j) s.mu[j] /= double(n);

    s.sigma.assign(d * d, 0.0);
    std::vector<double> centered(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) centered[j] = double(features.at(i, j)) - s.mu[j];
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a; b < d; ++b) s.sigma[a * d + b] += centered[a] * centered[b];
    }
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) {
            s.sigma[a * d + b] /= double(n - 1);
            s.sigma[b * d + a] = s.sigma[a * d + b];
        }
    return s;
}

void validate_stats(const GaussianStats& s) {
    if (s.n < 2) fail(Errc::too_few_samples, "stats computed from fewer than 2 samples");
    if (s.mu.size() != s.dim || s.sigma.size() != s.dim * s.dim)
        fail(Errc::shape_mismatch, "stats field sizes disagree");
    for (std::size_t a = 0; a < s.dim; ++a)
        for (std::size_t b = a + 1; b < s.dim; ++b)
            if (std::abs(s.sigma[a * s.dim + b] - s.sigma[b * s.dim + a]) > 1e-8)
                fail(Errc::not_psd, "covariance is not symmetric within 1e-8");
    psd_eigen(as_matrix(s), "covariance");
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
    if (a.dim != b.dim)
        fail(Errc::dim_mismatch,
             "stats dims differ: " + std::to_string(a.dim) + " vs " + std::to_string(b.dim));
    validate_stats(a);
    validate_stats(b);

    const Eigen::MatrixXd sa = as_matrix(a);
    const Eigen::MatrixXd sb = as_matrix(b);

    auto [va, la] = psd_eigen(sa, "first covariance");
    Eigen::MatrixXd sqrt_a = va * la.cwiseSqrt().asDiagonal() * va.transpose();

    Eigen::MatrixXd inner = sqrt_a * sb * sqrt_a;
    inner = 0.5 * (inner + inner.transpose().eval()); // symmetrize fp residue
    auto [vi, li] = psd_eigen(inner, "product");

    double mean_term = 0.0;
    for (std::size_t j = 0; j < a.dim; ++j) {
        const double diff = a.mu[j] - b.mu[j];
        mean_term += diff * diff;
    }
    const double trace_term = sa.trace() + sb.trace() - 2.0 * li.cwiseSqrt().sum();
    return std::max(0.0, mean_term + trace_term);
}

} // namespace cdlc
