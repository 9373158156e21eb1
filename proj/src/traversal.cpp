#include "cdlc/traversal.hpp"

#include "cdlc/error.hpp"
#include "cdlc/parallel.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>

namespace cdlc {

LatentMatrix apply_direction(const LatentMatrix& latents, std::span<const double> direction,
                             double alpha) {
    if (direction.size() != latents.d)
        fail(Errc::dim_mismatch, "direction length " + std::to_string(direction.size()) +
                                     " != latent d " + std::to_string(latents.d));
    double s = 0.0;
    for (double v : direction) s += v * v;
    if (std::abs(std::sqrt(s) - 1.0) > 1e-6)
        fail(Errc::dim_mismatch, "direction is not unit-norm");

    LatentMatrix out = latents;
    for (std::size_t i = 0; i < out.n; ++i) {
        float* row = out.data.data() + i * out.d;
        for (std::size_t j = 0; j < out.d; ++j)
            row[j] = static_cast<float>(double(row[j]) + alpha * direction[j]);
    }
    return out;
}

LinearSoftmaxScorer::LinearSoftmaxScorer(std::vector<std::string> classes,
                                         std::vector<double> weights, std::vector<double> bias,
                                         std::size_t d, unsigned threads)
    : classes_(std::move(classes)), weights_(std::move(weights)), bias_(std::move(bias)), d_(d),
      threads_(threads) {
    const std::size_t c = classes_.size();
    if (c < 2) fail(Errc::bad_config, "scorer needs at least 2 classes");
    if (weights_.size() != c * d_ || bias_.size() != c)
        fail(Errc::dim_mismatch, "scorer weight/bias shapes disagree with classes and d");
    for (double w : weights_)
        if (!std::isfinite(w)) fail(Errc::non_finite_value, "non-finite scorer weight");
    for (double b : bias_)
        if (!std::isfinite(b)) fail(Errc::non_finite_value, "non-finite scorer bias");
}

ProbTable LinearSoftmaxScorer::score(const LatentMatrix& latents) const {
    if (latents.d != d_)
        fail(Errc::dim_mismatch, "latent d " + std::to_string(latents.d) +
                                     " != scorer d " + std::to_string(d_));
    const std::size_t c = classes_.size();
    ProbTable t;
    t.ids = latents.ids;
    t.classes = classes_;
    t.n = latents.n;
    t.c = c;
    t.probs.resize(t.n * c);

    parallel_for(latents.n, threads_, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> logits(c);
        for (std::size_t i = lo; i < hi; ++i) {
            const auto z = latents.row(i);
            double max_logit = -std::numeric_limits<double>::infinity();
            for (std::size_t y = 0; y < c; ++y) {
                double acc = bias_[y];
                const double* w = weights_.data() + y * d_;
                for (std::size_t j = 0; j < d_; ++j) acc += w[j] * double(z[j]);
                logits[y] = acc;
                max_logit = std::max(max_logit, acc);
            }
            double denom = 0.0;
            for (std::size_t y = 0; y < c; ++y) {
                logits[y] = std::exp(logits[y] - max_logit);
                denom += logits[y];
            }
            for (std::size_t y = 0; y < c; ++y) t.probs[i * c + y] = logits[y] / denom;
        }
    });
    return t;
}

LinearSoftmaxScorer LinearSoftmaxScorer::load(const std::filesystem::path& path, unsigned threads) {
    std::ifstream in(path);
    if (!in) fail(Errc::io_failure, "cannot open '" + path.string() + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
        auto classes = j.at("classes").get<std::vector<std::string>>();
        auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
        auto bias = j.at("bias").get<std::vector<double>>();
        if (rows.size() != classes.size())
            fail(Errc::dim_mismatch, path.string() + ": one weight row per class required");
        const std::size_t d = rows.empty() ? 0 : rows.front().size();
        std::vector<double> weights;
        weights.reserve(rows.size() * d);
        for (const auto& r : rows) {
            if (r.size() != d) fail(Errc::dim_mismatch, path.string() + ": ragged weight rows");
            weights.insert(weights.end(), r.begin(), r.end());
        }
        return LinearSoftmaxScorer(std::move(classes), std::move(weights), std::move(bias), d,
                                   threads);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::bad_format, path.string() + ": " + e.what());
    }
}

void LinearSoftmaxScorer::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["classes"] = classes_;
    std::vector<std::vector<double>> rows;
    rows.reserve(classes_.size());
    for (std::size_t c = 0; c < classes_.size(); ++c) {
        auto w = weight_row(c);
        rows.emplace_back(w.begin(), w.end());
    }
    j["weights"] = rows;
    j["bias"] = bias_;
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) fail(Errc::io_failure, "write error on '" + path.string() + "'");
}

double success_rate(const ProbTable& baseline, const ProbTable& manipulated,
                    const std::string& target) {
    if (baseline.ids != manipulated.ids)
        fail(Errc::id_mismatch, "baseline and manipulated tables list different ids");
    if (baseline.classes != manipulated.classes)
        fail(Errc::id_mismatch, "baseline and manipulated tables list different classes");
    const std::size_t t = baseline.class_index(target);
    if (baseline.n == 0) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < baseline.n; ++i)
        if (manipulated.at(i, t) > baseline.at(i, t)) ++hits;
    return double(hits) / double(baseline.n);
}

} // namespace cdlc
