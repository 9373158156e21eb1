#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cdlc {

struct AlphaSr {
    double alpha = 0.0;
    double sr_fraction = 0.0;

    bool operator==(const AlphaSr&) const = default;
};

/// One evaluated concept direction. Fractions live in [0,1]; the markdown
/// emitter converts to the percent scales used in the tables.
struct ConceptRecord {
    std::size_t index = 0;
    std::string name; // defaults to "c<index>"
    std::optional<double> alpha;
    std::optional<double> sr_fraction;
    std::optional<double> lpips; // externally computed, ingest only
    std::optional<double> fid;
    std::optional<double> tcav_mean;
    std::optional<double> tcav_std;
    std::vector<AlphaSr> sweep; // SR per candidate alpha, ascending alpha

    bool operator==(const ConceptRecord&) const = default;
};

/// One cluster-count ablation row. Influence metrics are stored in
/// probability units; *_pp views are percentage points (x100).
struct AblationRecord {
    std::size_t k = 0;
    std::optional<double> silhouette;
    std::optional<double> redundancy_cosine;
    std::optional<double> coverage_fraction;
    std::optional<double> best_of_k_prob;
    std::optional<double> top_q_mean_prob;

    bool operator==(const AblationRecord&) const = default;
};

struct ClassReport {
    std::string label;
    std::size_t n_pairs = 0;
    std::size_t n_dropped = 0;
    std::size_t k_star = 0;
    std::optional<double> silhouette;
    std::optional<double> redundancy_cosine;
    std::optional<double> coverage_fraction;
    std::optional<double> best_of_k_prob;
    std::optional<double> top_q_mean_prob;
    std::vector<ConceptRecord> concepts;
    std::vector<AblationRecord> ablation;

    bool operator==(const ClassReport&) const = default;
};

/// Multi-layer TCAV cell (concept x layer, mean +- std).
struct TcavCell {
    std::string concept_name;
    std::string layer;
    double mean = 0.0;
    double std_dev = 0.0;

    bool operator==(const TcavCell&) const = default;
};

struct Provenance {
    std::string tool = "cdlc";
    std::string version;
    std::uint64_t seed = 0;
    std::size_t restarts = 0;
    std::string config_hash;

    bool operator==(const Provenance&) const = default;
};

struct EvalReport {
    Provenance provenance;
    double delta = 0.05; // coverage threshold, probability units
    double q = 0.3;      // top-q fraction
    std::vector<ClassReport> classes;
    std::vector<TcavCell> tcav_layers;

    bool operator==(const EvalReport&) const = default;
};

/// FNV-1a 64 over a byte string, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json_text);

/// Concept table in the SR/LPIPS/FID/TCAV column layout.
std::string concept_table_markdown(const EvalReport& report);
/// Per-class ablation rows: K, redundancy, coverage, influences.
std::string ablation_table_markdown(const EvalReport& report);
/// Concept x layer matrix of "mean+-std" TCAV cells.
std::string tcav_table_markdown(const EvalReport& report);
/// All sections that have content, concatenated.
std::string report_markdown(const EvalReport& report);

void write_text_file(const std::string& text, const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

} // namespace cdlc
