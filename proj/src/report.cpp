#include "cdlc/report.hpp"

#include "cdlc/error.hpp"
#include "cdlc/strfmt.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace cdlc {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json opt_json(const std::optional<double>& v) {
    if (v) return *v;
    return nullptr;
}

std::optional<double> opt_from(const ordered_json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

std::string cell(const std::optional<double>& v, int decimals, double scale = 1.0) {
    if (!v) return "-";
    return fmt_fixed(*v * scale, decimals);
}

} // namespace

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string report_to_json(const EvalReport& report) {
    ordered_json j;
    j["schema_version"] = 1;
    j["provenance"] = {{"tool", report.provenance.tool},
                       {"version", report.provenance.version},
                       {"seed", report.provenance.seed},
                       {"restarts", report.provenance.restarts},
                       {"config_hash", report.provenance.config_hash}};
    j["units"] = {{"sr_fraction", "probability in [0,1]"},
                  {"coverage_fraction", "fraction of images"},
                  {"best_of_k_prob", "probability delta in [-1,1]"},
                  {"top_q_mean_prob", "probability delta in [-1,1]"},
                  {"redundancy_cosine", "mean pairwise cosine in [-1,1]"},
                  {"alpha", "latent units"},
                  {"markdown_scales", "SR as percent, influences as percentage points (x100)"}};
    j["delta"] = report.delta;
    j["q"] = report.q;

    j["classes"] = ordered_json::array();
    for (const auto& cls : report.classes) {
        ordered_json c;
        c["label"] = cls.label;
        c["n_pairs"] = cls.n_pairs;
        c["n_dropped"] = cls.n_dropped;
        c["k_star"] = cls.k_star;
        c["silhouette"] = opt_json(cls.silhouette);
        c["redundancy_cosine"] = opt_json(cls.redundancy_cosine);
        c["coverage_fraction"] = opt_json(cls.coverage_fraction);
        c["best_of_k_prob"] = opt_json(cls.best_of_k_prob);
        c["top_q_mean_prob"] = opt_json(cls.top_q_mean_prob);
        c["concepts"] = ordered_json::array();
        for (const auto& con : cls.concepts) {
            ordered_json sweep = ordered_json::array();
            for (const auto& s : con.sweep)
                sweep.push_back({{"alpha", s.alpha}, {"sr_fraction", s.sr_fraction}});
            c["concepts"].push_back({{"index", con.index},
                                     {"name", con.name},
                                     {"alpha", opt_json(con.alpha)},
                                     {"sr_fraction", opt_json(con.sr_fraction)},
                                     {"lpips", opt_json(con.lpips)},
                                     {"fid", opt_json(con.fid)},
                                     {"tcav_mean", opt_json(con.tcav_mean)},
                                     {"tcav_std", opt_json(con.tcav_std)},
                                     {"sweep", std::move(sweep)}});
        }
        c["ablation"] = ordered_json::array();
        for (const auto& ab : cls.ablation) {
            c["ablation"].push_back({{"k", ab.k},
                                     {"silhouette", opt_json(ab.silhouette)},
                                     {"redundancy_cosine", opt_json(ab.redundancy_cosine)},
                                     {"coverage_fraction", opt_json(ab.coverage_fraction)},
                                     {"best_of_k_prob", opt_json(ab.best_of_k_prob)},
                                     {"top_q_mean_prob", opt_json(ab.top_q_mean_prob)}});
        }
        j["classes"].push_back(std::move(c));
    }

    j["tcav_layers"] = ordered_json::array();
    for (const auto& cell : report.tcav_layers)
        j["tcav_layers"].push_back({{"concept", cell.concept_name},
                                    {"layer", cell.layer},
                                    {"mean", cell.mean},
                                    {"std", cell.std_dev}});
    return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::bad_format, std::string("report JSON: ") + e.what());
    }
    try {
        EvalReport r;
        const auto& p = j.at("provenance");
        r.provenance.tool = p.at("tool").get<std::string>();
        r.provenance.version = p.at("version").get<std::string>();
        r.provenance.seed = p.at("seed").get<std::uint64_t>();
        r.provenance.restarts = p.at("restarts").get<std::size_t>();
        r.provenance.config_hash = p.at("config_hash").get<std::string>();
        r.delta = j.at("delta").get<double>();
        r.q = j.at("q").get<double>();
        for (const auto& c : j.at("classes")) {
            ClassReport cls;
            cls.label = c.at("label").get<std::string>();
            cls.n_pairs = c.at("n_pairs").get<std::size_t>();
            cls.n_dropped = c.at("n_dropped").get<std::size_t>();
            cls.k_star = c.at("k_star").get<std::size_t>();
            cls.silhouette = opt_from(c, "silhouette");
            cls.redundancy_cosine = opt_from(c, "redundancy_cosine");
            cls.coverage_fraction = opt_from(c, "coverage_fraction");
            cls.best_of_k_prob = opt_from(c, "best_of_k_prob");
            cls.top_q_mean_prob = opt_from(c, "top_q_mean_prob");
            for (const auto& con : c.at("concepts")) {
                ConceptRecord rec;
                rec.index = con.at("index").get<std::size_t>();
                rec.name = con.at("name").get<std::string>();
                rec.alpha = opt_from(con, "alpha");
                rec.sr_fraction = opt_from(con, "sr_fraction");
                rec.lpips = opt_from(con, "lpips");
                rec.fid = opt_from(con, "fid");
                rec.tcav_mean = opt_from(con, "tcav_mean");
                rec.tcav_std = opt_from(con, "tcav_std");
                if (con.contains("sweep"))
                    for (const auto& s : con.at("sweep"))
                        rec.sweep.push_back(
                            {s.at("alpha").get<double>(), s.at("sr_fraction").get<double>()});
                cls.concepts.push_back(std::move(rec));
            }
            for (const auto& ab : c.at("ablation")) {
                AblationRecord rec;
                rec.k = ab.at("k").get<std::size_t>();
                rec.silhouette = opt_from(ab, "silhouette");
                rec.redundancy_cosine = opt_from(ab, "redundancy_cosine");
                rec.coverage_fraction = opt_from(ab, "coverage_fraction");
                rec.best_of_k_prob = opt_from(ab, "best_of_k_prob");
                rec.top_q_mean_prob = opt_from(ab, "top_q_mean_prob");
                cls.ablation.push_back(rec);
            }
            r.classes.push_back(std::move(cls));
        }
        for (const auto& cell : j.at("tcav_layers")) {
            TcavCell tc;
            tc.concept_name = cell.at("concept").get<std::string>();
            tc.layer = cell.at("layer").get<std::string>();
            tc.mean = cell.at("mean").get<double>();
            tc.std_dev = cell.at("std").get<double>();
            r.tcav_layers.push_back(std::move(tc));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::bad_format, std::string("report JSON: ") + e.what());
    }
}

std::string concept_table_markdown(const EvalReport& report) {
    std::string out;
    out += "| Concept | SR (%) | LPIPS | FID | TCAV |\n";
    out += "|---|---:|---:|---:|---:|\n";
    for (const auto& cls : report.classes) {
        for (const auto& con : cls.concepts) {
            out += "| " + (con.name.empty() ? "c" + std::to_string(con.index) : con.name);
            out += " | " + cell(con.sr_fraction, 1, 100.0);
            out += " | " + cell(con.lpips, 2);
            out += " | " + cell(con.fid, 1);
            out += " | " + cell(con.tcav_mean, 2);
            out += " |\n";
        }
    }
    return out;
}

std::string ablation_table_markdown(const EvalReport& report) {
    std::string out;
    out += "| Target class | K | Redundancy | Coverage | Best-of-K (pp) | Top-q mean (pp) |\n";
    out += "|---|---:|---:|---:|---:|---:|\n";
    for (const auto& cls : report.classes) {
        for (const auto& ab : cls.ablation) {
            out += "| " + cls.label;
            out += " | " + std::to_string(ab.k);
            out += " | " + cell(ab.redundancy_cosine, 2);
            out += " | " + cell(ab.coverage_fraction, 2);
            out += " | " + cell(ab.best_of_k_prob, 1, 100.0);
            out += " | " + cell(ab.top_q_mean_prob, 1, 100.0);
            out += " |\n";
        }
    }
    return out;
}

std::string tcav_table_markdown(const EvalReport& report) {
    std::vector<std::string> layers, concepts;
    for (const auto& c : report.tcav_layers) {
        if (std::find(layers.begin(), layers.end(), c.layer) == layers.end())
            layers.push_back(c.layer);
        if (std::find(concepts.begin(), concepts.end(), c.concept_name) == concepts.end())
            concepts.push_back(c.concept_name);
    }
    std::string out = "| Concept |";
    for (const auto& l : layers) out += " " + l + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < layers.size(); ++i) out += "---:|";
    out += "\n";
    for (const auto& name : concepts) {
        out += "| " + name + " |";
        for (const auto& layer : layers) {
            const TcavCell* found = nullptr;
            for (const auto& c : report.tcav_layers)
                if (c.concept_name == name && c.layer == layer) {
                    found = &c;
                    break;
                }
            if (found)
                out += " " + fmt_fixed(found->mean, 2) + "±" + fmt_fixed(found->std_dev, 2) +
                       " |";
            else
                out += " - |";
        }
        out += "\n";
    }
    return out;
}

std::string report_markdown(const EvalReport& report) {
    std::string out = "# Evaluation report\n";
    bool any_concepts = false, any_ablation = false;
    for (const auto& cls : report.classes) {
        any_concepts = any_concepts || !cls.concepts.empty();
        any_ablation = any_ablation || !cls.ablation.empty();
    }
    if (any_concepts) out += "\n## Concepts\n\n" + concept_table_markdown(report);
    if (any_ablation) out += "\n## Cluster-count ablation\n\n" + ablation_table_markdown(report);
    if (!report.tcav_layers.empty()) out += "\n## TCAV by layer\n\n" + tcav_table_markdown(report);
    return out;
}

void write_text_file(const std::string& text, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io_failure, "cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) fail(Errc::io_failure, "write error on '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::io_failure, "cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) fail(Errc::io_failure, "read error on '" + path.string() + "'");
    return std::move(ss).str();
}

} // namespace cdlc
