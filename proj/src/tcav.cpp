#include "cdlc/tcav.hpp"

#include "cdlc/error.hpp"
#include "cdlc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cdlc {

namespace {

constexpr std::size_t kIterations = 500;
constexpr double kStepSize = 0.1;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

CavModel fit_cav(const LatentMatrix& concept_acts, const LatentMatrix& negative_acts,
                 double l2_reg, std::uint64_t seed) {
    if (concept_acts.n == 0 || negative_acts.n == 0)
        fail(Errc::degenerate_data, "concept and negative sets must be non-empty");
    if (concept_acts.d != negative_acts.d)
        fail(Errc::dim_mismatch, "concept d=" + std::to_string(concept_acts.d) +
                                     " vs negatives d=" + std::to_string(negative_acts.d));
    const std::size_t d = concept_acts.d;
    const std::size_t n = concept_acts.n + negative_acts.n;

    // All rows identical means there is nothing to separate at all.
    {
        const auto first = concept_acts.row(0);
        auto same_as_first = [&](const LatentMatrix& m) {
            for (std::size_t i = 0; i < m.n; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    if (m.at(i, j) != first[j]) return false;
            return true;
        };
        if (same_as_first(concept_acts) && same_as_first(negative_acts))
            fail(Errc::degenerate_data, "all activations are identical");
    }

    auto row_at = [&](std::size_t i) {
        return i < concept_acts.n ? concept_acts.row(i) : negative_acts.row(i - concept_acts.n);
    };
    auto label_at = [&](std::size_t i) { return i < concept_acts.n ? 1.0 : -1.0; };

    // Full-batch gradient descent on the regularized logistic loss, zero
    // init, fixed budget. Deterministic given (data, l2_reg).
    std::vector<double> w(d, 0.0);
    double bias = 0.0;
    std::vector<double> grad_w(d);
    const double inv_n = 1.0 / double(n);
    for (std::size_t it = 0; it < kIterations; ++it) {
        std::fill(grad_w.begin(), grad_w.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = row_at(i);
            const double y = label_at(i);
            double margin = bias;
            for (std::size_t j = 0; j < d; ++j) margin += w[j] * double(x[j]);
            const double coeff = -y * sigmoid(-y * margin);
            for (std::size_t j = 0; j < d; ++j) grad_w[j] += coeff * double(x[j]);
            grad_b += coeff;
        }
        for (std::size_t j = 0; j < d; ++j)
            w[j] -= kStepSize * (grad_w[j] * inv_n + l2_reg * w[j]);
        bias -= kStepSize * grad_b * inv_n;
    }

    CavModel model;
    model.seed = seed;
    double norm_sq = 0.0;
    for (double v : w) norm_sq += v * v;
    const double norm = std::sqrt(norm_sq);
    if (norm <= 1e-12) {
        // Inseparable data (e.g. the concept set equals the negative set):
        // no orientation exists. Surface it instead of failing.
        model.degenerate = true;
        model.v.assign(d, 0.0);
        model.v[0] = 1.0;
    } else {
        model.v.resize(d);
        for (std::size_t j = 0; j < d; ++j) model.v[j] = w[j] / norm;
    }

    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = row_at(i);
        double margin = bias;
        for (std::size_t j = 0; j < d; ++j) margin += w[j] * double(x[j]);
        const bool predicted_concept = margin > 0.0;
        if (predicted_concept == (label_at(i) > 0.0)) ++correct;
    }
    model.train_accuracy = double(correct) / double(n);
    return model;
}

double tcav_score(const LatentMatrix& gradients, const CavModel& cav) {
    if (gradients.n == 0) fail(Errc::empty_gradients, "no gradient rows supplied");
    if (gradients.d != cav.v.size())
        fail(Errc::dim_mismatch, "gradient d=" + std::to_string(gradients.d) +
                                     " vs CAV d=" + std::to_string(cav.v.size()));
    std::size_t positive = 0;
    for (std::size_t i = 0; i < gradients.n; ++i) {
        double s = 0.0;
        const auto g = gradients.row(i);
        for (std::size_t j = 0; j < gradients.d; ++j) s += double(g[j]) * cav.v[j];
        if (s > 0.0) ++positive; // zero counts as negative
    }
    return double(positive) / double(gradients.n);
}

TcavRuns tcav_runs(const LatentMatrix& concept_acts, const LatentMatrix& negatives_pool,
                   const LatentMatrix& gradients, std::size_t runs, std::uint64_t seed,
                   double l2_reg) {
    if (runs == 0) fail(Errc::bad_config, "runs must be at least 1");
    if (negatives_pool.n == 0) fail(Errc::insufficient_negatives, "negatives pool is empty");
    const std::size_t subset = std::min(negatives_pool.n, std::max<std::size_t>(1, concept_acts.n));
    if (runs > 1 && negatives_pool.n <= subset)
        fail(Errc::insufficient_negatives,
             "pool of " + std::to_string(negatives_pool.n) +
                 " cannot produce distinct subsets of size " + std::to_string(subset));

    TcavRuns out;
    out.per_run.reserve(runs);
    for (std::size_t r = 0; r < runs; ++r) {
        const std::uint64_t run_seed = mix_seed(seed, r);
        Rng rng(run_seed);
        // Partial Fisher-Yates: first `subset` entries of a seeded shuffle.
        std::vector<std::size_t> idx(negatives_pool.n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < subset; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.below(negatives_pool.n - i));
            std::swap(idx[i], idx[j]);
        }
        LatentMatrix negatives;
        negatives.n = subset;
        negatives.d = negatives_pool.d;
        negatives.data.resize(subset * negatives.d);
        negatives.ids.reserve(subset);
        for (std::size_t i = 0; i < subset; ++i) {
            const auto src = negatives_pool.row(idx[i]);
            std::copy(src.begin(), src.end(), negatives.data.begin() + i * negatives.d);
            negatives.ids.push_back(negatives_pool.ids[idx[i]]);
        }
        const CavModel cav = fit_cav(concept_acts, negatives, l2_reg, run_seed);
        out.per_run.push_back(tcav_score(gradients, cav));
    }

    double sum = 0.0;
    for (double s : out.per_run) sum += s;
    out.mean = sum / double(runs);
    if (runs > 1) {
        double ss = 0.0;
        for (double s : out.per_run) ss += (s - out.mean) * (s - out.mean);
        out.std_dev = std::sqrt(ss / double(runs - 1));
    }
    return out;
}

} // namespace cdlc
