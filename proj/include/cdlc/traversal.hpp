#pragma once

#include "cdlc/types.hpp"

#include <filesystem>
#include <span>

namespace cdlc {

/// row_i = z_i + alpha * direction. The direction must be unit-norm within
/// 1e-6 and match the latent dimension; ids are preserved.
LatentMatrix apply_direction(const LatentMatrix& latents, std::span<const double> direction,
                             double alpha);

/// Maps latents to class probabilities. Implementations must be pure.
class ProbScorer {
public:
    virtual ~ProbScorer() = default;
    virtual ProbTable score(const LatentMatrix& latents) const = 0;
    virtual const std::vector<std::string>& classes() const = 0;
};

/// softmax(W z + b), log-sum-exp stabilized. Stands in for an external
/// classifier so the evaluation math runs end to end without one.
class LinearSoftmaxScorer : public ProbScorer {
public:
    LinearSoftmaxScorer(std::vector<std::string> classes, std::vector<double> weights,
                        std::vector<double> bias, std::size_t d, unsigned threads = 1);

    ProbTable score(const LatentMatrix& latents) const override;
    const std::vector<std::string>& classes() const override { return classes_; }
    std::size_t dim() const { return d_; }
    std::span<const double> weight_row(std::size_t c) const { return {weights_.data() + c * d_, d_}; }
    std::span<const double> bias() const { return bias_; }

    /// JSON file: {"classes": [...], "weights": [[...] per class], "bias": [...]}.
    static LinearSoftmaxScorer load(const std::filesystem::path& path, unsigned threads = 1);
    void save(const std::filesystem::path& path) const;

private:
    std::vector<std::string> classes_;
    std::vector<double> weights_; // c * d, row-major
    std::vector<double> bias_;    // length c
    std::size_t d_ = 0;
    unsigned threads_ = 1;
};

/// Fraction of samples whose target probability strictly increased. The
/// baseline is the reconstruction's probabilities; equal probabilities do
/// not count (alpha = 0 therefore yields 0).
double success_rate(const ProbTable& baseline, const ProbTable& manipulated,
                    const std::string& target);

} // namespace cdlc
