#pragma once

#include "cdlc/report.hpp"

#include <filesystem>
#include <map>
#include <optional>

namespace cdlc {

/// Declarative pipeline configuration. `from_json_file` resolves relative
/// paths against the config file's directory; CLI flags override seed,
/// output directory and thread count afterwards.
struct PipelineConfig {
    std::filesystem::path factual;
    std::filesystem::path counterfactual;
    std::filesystem::path manifest;
    std::optional<std::filesystem::path> test_latents;
    std::optional<std::filesystem::path> scorer_weights;
    std::optional<std::filesystem::path> external_metrics;
    std::map<std::string, std::size_t> per_class_k; // fixed k per class label
    std::size_t k_min = 2, k_max = 12;              // fallback selection range
    std::vector<double> alphas;
    double delta = 0.05;
    double q = 0.3;
    double epsilon_norm = 1e-8;
    std::uint64_t seed = 0;
    std::size_t restarts = 10;
    std::size_t max_iter = 300;
    double tol = 1e-9;
    std::optional<std::pair<std::size_t, std::size_t>> ablate_range;
    std::filesystem::path out_dir;
    unsigned threads = 1; // execution detail, excluded from the config hash

    static PipelineConfig from_json_file(const std::filesystem::path& path);
    /// Deterministic serialization of everything that defines the
    /// experiment; its FNV-1a hash lands in report provenance.
    std::string canonical_json() const;
    void validate() const;
};

/// diff -> normalize -> cluster/select-k -> directions -> apply per alpha ->
/// score -> metrics -> report. Intermediate artifacts land in out_dir;
/// reruns with identical inputs and config produce byte-identical reports.
EvalReport run_pipeline(const PipelineConfig& config);

/// Merges externally computed per-concept metrics (LPIPS, FID, TCAV) into a
/// report. JSON: {"classes": [{"label": .., "concepts": [{"index": ..,
/// "name"?, "lpips"?, "fid"?, "tcav_mean"?, "tcav_std"?}]}]}.
void merge_external_metrics(EvalReport& report, const std::filesystem::path& path);

/// Replaces characters outside [A-Za-z0-9._-] so labels can name files.
std::string sanitize_label(const std::string& label);

} // namespace cdlc
