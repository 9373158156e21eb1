#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cdlc {

/// Row-major N x d matrix of 32-bit latent values with one string id per row.
struct LatentMatrix {
    std::vector<std::string> ids;
    std::vector<float> data; // n * d, row-major
    std::size_t n = 0;
    std::size_t d = 0;

    std::span<const float> row(std::size_t i) const { return {data.data() + i * d, d}; }
    std::span<float> row(std::size_t i) { return {data.data() + i * d, d}; }
    float at(std::size_t i, std::size_t j) const { return data[i * d + j]; }

    /// Checks shape, id uniqueness and finiteness; throws on violation.
    void validate() const;
};

struct PairEntry {
    std::string factual_id;
    std::string counterfactual_id;
    std::string predicted_class;
    std::string target_class;
    std::size_t line = 0; // 1-based manifest line, for error reporting
};

struct PairManifest {
    std::vector<PairEntry> entries;

    /// Throws UnresolvedId unless every entry resolves in both matrices.
    void validate_against(const LatentMatrix& factual, const LatentMatrix& counterfactual) const;

    /// Distinct target classes in first-appearance order.
    std::vector<std::string> target_classes() const;
};

/// Unit-norm rows in double precision plus the pre-normalization L2 norms.
struct UnitMatrix {
    std::vector<std::string> ids;
    std::vector<double> data; // n * d, row-major, each row unit-norm
    std::vector<double> source_norms;
    std::size_t n = 0;
    std::size_t d = 0;

    std::span<const double> row(std::size_t i) const { return {data.data() + i * d, d}; }
    void validate() const;
};

struct ClusterModel {
    std::size_t k = 0;
    std::size_t d = 0;
    std::vector<std::uint32_t> assignments; // size n, values in [0, k)
    std::vector<double> centers;            // k * d, row-major, unit rows
    double objective = 0.0;                 // sum_i <x_i, center(assign_i)>
    double silhouette = 0.0;                // filled by select_k / callers
    bool has_silhouette = false;
    std::uint64_t seed = 0;
    std::size_t iterations = 0;
    std::size_t restarts_used = 0;
    std::vector<double> objective_log; // per-iteration objective of the winning restart

    std::span<const double> center(std::size_t c) const { return {centers.data() + c * d, d}; }
};

struct DirectionProvenance {
    std::uint64_t seed = 0;
    double silhouette = 0.0;
    bool has_silhouette = false;
    std::size_t n_samples = 0;
};

/// K unit-norm concept directions for one target class.
struct DirectionSet {
    std::string class_label;
    std::vector<double> directions; // k * d, row-major, unit rows
    std::size_t k = 0;
    std::size_t d = 0;
    DirectionProvenance provenance;

    std::span<const double> direction(std::size_t i) const { return {directions.data() + i * d, d}; }
    void validate() const;
};

/// N x C table of class probabilities, one row per sample id.
struct ProbTable {
    std::vector<std::string> ids;
    std::vector<std::string> classes;
    std::vector<double> probs; // n * c, row-major
    std::size_t n = 0;
    std::size_t c = 0;

    double at(std::size_t i, std::size_t j) const { return probs[i * c + j]; }
    std::span<const double> row(std::size_t i) const { return {probs.data() + i * c, c}; }

    /// Index of `label` in classes; throws UnknownTarget if absent.
    std::size_t class_index(const std::string& label) const;
    void validate() const; // rows sum to 1 within 1e-5, entries in [0,1]
};

/// Per-image, per-concept probability effects in [-1, 1].
struct EffectTable {
    std::vector<std::string> ids;
    std::vector<double> effects; // n * k, row-major
    std::size_t n = 0;
    std::size_t k = 0;

    double at(std::size_t i, std::size_t j) const { return effects[i * k + j]; }
    void validate() const;
};

/// Ordered strictly increasing traversal strengths.
struct AlphaSweep {
    std::vector<double> values;
    void validate() const;
};

/// Mean and unbiased covariance of a feature sample.
struct GaussianStats {
    std::vector<double> mu;    // length dim
    std::vector<double> sigma; // dim * dim, row-major, symmetric
    std::size_t dim = 0;
    std::size_t n = 0;
};

struct CavModel {
    std::vector<double> v; // unit-norm, oriented toward the concept class
    double train_accuracy = 0.0;
    std::uint64_t seed = 0;
    bool degenerate = false; // set when the data carried no separating signal
};

struct PlantedSpec {
    std::size_t k_true = 0;
    std::size_t d = 0;
    std::size_t n = 0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> mixing; // empty = uniform; else k_true proportions summing to 1

    void validate() const;
};

} // namespace cdlc
