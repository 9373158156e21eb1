#include "cdlc/pipeline.hpp"

#include "cdlc/concept_metrics.hpp"
#include "cdlc/error.hpp"
#include "cdlc/latent_diff.hpp"
#include "cdlc/sphere_cluster.hpp"
#include "cdlc/strfmt.hpp"
#include "cdlc/tensor_io.hpp"
#include "cdlc/traversal.hpp"
#include "cdlc/version.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <memory>

namespace cdlc {

namespace {

using ordered_json = nlohmann::ordered_json;

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        fail(e.code(), std::string(name) + " stage: " + e.detail());
    }
}

/// Exclusive lock file in the output directory; removed on scope exit.
class DirLock {
public:
    explicit DirLock(const std::filesystem::path& dir) : path_(dir / ".cdlc.lock") {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) fail(Errc::io_failure, "cannot create '" + dir.string() + "': " + ec.message());
        if (std::filesystem::exists(path_))
            fail(Errc::lock_held, "output directory '" + dir.string() +
                                      "' is locked by another run (remove " + path_.string() +
                                      " if stale)");
        std::ofstream out(path_);
        if (!out) fail(Errc::io_failure, "cannot create lock file '" + path_.string() + "'");
        out << "locked\n";
    }
    ~DirLock() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::filesystem::path path_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
}

} // namespace

std::string sanitize_label(const std::string& label) {
    std::string out;
    out.reserve(label.size());
    for (char c : label) {
        const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                        (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? "unnamed" : out;
}

PipelineConfig PipelineConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::bad_config, "cannot open config '" + path.string() + "'");
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::bad_config, path.string() + ": " + e.what());
    }
    const std::filesystem::path base = path.parent_path();

    PipelineConfig c;
    try {
        c.factual = resolve(base, j.at("factual").get<std::string>());
        c.counterfactual = resolve(base, j.at("counterfactual").get<std::string>());
        c.manifest = resolve(base, j.at("manifest").get<std::string>());
        if (j.contains("test_latents"))
            c.test_latents = resolve(base, j.at("test_latents").get<std::string>());
        if (j.contains("scorer_weights"))
            c.scorer_weights = resolve(base, j.at("scorer_weights").get<std::string>());
        if (j.contains("external_metrics"))
            c.external_metrics = resolve(base, j.at("external_metrics").get<std::string>());
        if (j.contains("k"))
            c.per_class_k = j.at("k").get<std::map<std::string, std::size_t>>();
        if (j.contains("k_range")) {
            const auto r = j.at("k_range").get<std::vector<std::size_t>>();
            if (r.size() != 2) fail(Errc::bad_config, "k_range must be [min, max]");
            c.k_min = r[0];
            c.k_max = r[1];
        }
        if (j.contains("alphas")) c.alphas = j.at("alphas").get<std::vector<double>>();
        if (j.contains("delta")) c.delta = j.at("delta").get<double>();
        if (j.contains("q")) c.q = j.at("q").get<double>();
        if (j.contains("epsilon_norm")) c.epsilon_norm = j.at("epsilon_norm").get<double>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("restarts")) c.restarts = j.at("restarts").get<std::size_t>();
        if (j.contains("max_iter")) c.max_iter = j.at("max_iter").get<std::size_t>();
        if (j.contains("tol")) c.tol = j.at("tol").get<double>();
        if (j.contains("ablate_range")) {
            const auto r = j.at("ablate_range").get<std::vector<std::size_t>>();
            if (r.size() != 2) fail(Errc::bad_config, "ablate_range must be [min, max]");
            c.ablate_range = std::make_pair(r[0], r[1]);
        }
        c.out_dir = resolve(base, j.at("out_dir").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::bad_config, path.string() + ": " + e.what());
    }
    return c;
}

std::string PipelineConfig::canonical_json() const {
    ordered_json j;
    j["factual"] = factual.string();
    j["counterfactual"] = counterfactual.string();
    j["manifest"] = manifest.string();
    j["test_latents"] = test_latents ? ordered_json(test_latents->string()) : ordered_json();
    j["scorer_weights"] = scorer_weights ? ordered_json(scorer_weights->string()) : ordered_json();
    j["external_metrics"] =
        external_metrics ? ordered_json(external_metrics->string()) : ordered_json();
    j["k"] = per_class_k;
    j["k_range"] = {k_min, k_max};
    j["alphas"] = alphas;
    j["delta"] = delta;
    j["q"] = q;
    j["epsilon_norm"] = epsilon_norm;
    j["seed"] = seed;
    j["restarts"] = restarts;
    j["max_iter"] = max_iter;
    j["tol"] = tol;
    if (ablate_range)
        j["ablate_range"] = {ablate_range->first, ablate_range->second};
    else
        j["ablate_range"] = nullptr;
    return j.dump();
}

void PipelineConfig::validate() const {
    for (const auto& [name, p] :
         std::initializer_list<std::pair<const char*, const std::filesystem::path*>>{
             {"factual", &factual}, {"counterfactual", &counterfactual}, {"manifest", &manifest}}) {
        if (!std::filesystem::exists(*p))
            fail(Errc::bad_config, std::string(name) + " file '" + p->string() + "' does not exist");
    }
    for (const auto& opt : {test_latents, scorer_weights, external_metrics})
        if (opt && !std::filesystem::exists(*opt))
            fail(Errc::bad_config, "file '" + opt->string() + "' does not exist");
    if (!(delta > 0.0)) fail(Errc::bad_config, "delta must be positive");
    if (!(q > 0.0 && q <= 1.0)) fail(Errc::bad_config, "q must lie in (0, 1]");
    if (k_min < 2 || k_min > k_max) fail(Errc::bad_config, "k_range must satisfy 2 <= min <= max");
    if (ablate_range && (ablate_range->first < 2 || ablate_range->first > ablate_range->second))
        fail(Errc::bad_config, "ablate_range must satisfy 2 <= min <= max");
    if (!alphas.empty()) {
        AlphaSweep sweep{alphas};
        sweep.validate();
    }
    if (out_dir.empty()) fail(Errc::bad_config, "out_dir must be set");
    for (const auto& [label, k] : per_class_k)
        if (k < 1) fail(Errc::bad_config, "k for class '" + label + "' must be >= 1");
}

namespace {

struct ScoringContext {
    std::unique_ptr<LinearSoftmaxScorer> scorer;
    LatentMatrix test;
    ProbTable baseline;
};

/// SR over the sweep for one direction; picks argmax SR, ties to the
/// smallest alpha.
struct SweepOutcome {
    std::vector<AlphaSr> sweep;
    double best_alpha = 0.0;
    double best_sr = -1.0;
    ProbTable best_probs;
};

SweepOutcome sweep_direction(const ScoringContext& ctx, std::span<const double> direction,
                             const std::vector<double>& alphas, const std::string& target) {
    SweepOutcome out;
    for (double alpha : alphas) {
        const LatentMatrix moved = apply_direction(ctx.test, direction, alpha);
        ProbTable probs = ctx.scorer->score(moved);
        const double sr = success_rate(ctx.baseline, probs, target);
        out.sweep.push_back({alpha, sr});
        if (sr > out.best_sr) {
            out.best_sr = sr;
            out.best_alpha = alpha;
            out.best_probs = std::move(probs);
        }
    }
    return out;
}

struct EffectMetrics {
    double coverage_fraction = 0.0;
    double best_of_k_prob = 0.0;
    double top_q_mean_prob = 0.0;
};

EffectMetrics effect_metrics(const EffectTable& t, double delta, double q) {
    return {coverage(t, delta), best_of_k(t), top_q_mean(t, q)};
}

} // namespace

void merge_external_metrics(EvalReport& report, const std::filesystem::path& path) {
    ordered_json j;
    try {
        std::ifstream in(path);
        if (!in) fail(Errc::io_failure, "cannot open '" + path.string() + "'");
        in >> j;
        for (const auto& cls : j.at("classes")) {
            const auto label = cls.at("label").get<std::string>();
            ClassReport* target = nullptr;
            for (auto& c : report.classes)
                if (c.label == label) target = &c;
            if (!target)
                fail(Errc::unknown_target,
                     path.string() + ": class '" + label + "' not present in report");
            for (const auto& con : cls.at("concepts")) {
                const auto index = con.at("index").get<std::size_t>();
                ConceptRecord* rec = nullptr;
                for (auto& r : target->concepts)
                    if (r.index == index) rec = &r;
                if (!rec)
                    fail(Errc::unknown_target, path.string() + ": concept index " +
                                                   std::to_string(index) + " not in class '" +
                                                   label + "'");
                if (con.contains("name")) rec->name = con.at("name").get<std::string>();
                if (con.contains("lpips")) rec->lpips = con.at("lpips").get<double>();
                if (con.contains("fid")) rec->fid = con.at("fid").get<double>();
                if (con.contains("tcav_mean")) rec->tcav_mean = con.at("tcav_mean").get<double>();
                if (con.contains("tcav_std")) rec->tcav_std = con.at("tcav_std").get<double>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::bad_format, path.string() + ": " + e.what());
    }
}

EvalReport run_pipeline(const PipelineConfig& config) {
    config.validate();
    DirLock lock(config.out_dir);
    const auto& out_dir = config.out_dir;

    KmeansOptions kopts;
    kopts.restarts = config.restarts;
    kopts.max_iter = config.max_iter;
    kopts.tol = config.tol;
    kopts.threads = config.threads;

    // Load inputs.
    const LatentMatrix factual =
        stage("load", [&] { return read_latent_matrix(config.factual); });
    const LatentMatrix counterfactual =
        stage("load", [&] { return read_latent_matrix(config.counterfactual); });
    const PairManifest manifest =
        stage("load", [&] { return load_pair_manifest(config.manifest); });

    if (manifest.entries.empty())
        fail(Errc::bad_format,
             "diff stage: manifest '" + config.manifest.string() + "' contains no entries");
    stage("diff", [&] {
        manifest.validate_against(factual, counterfactual);
        return 0;
    });

    // Optional scoring context, shared across classes.
    std::optional<ScoringContext> scoring;
    if (config.test_latents && config.scorer_weights && !config.alphas.empty()) {
        scoring.emplace();
        scoring->scorer = stage("score", [&] {
            return std::make_unique<LinearSoftmaxScorer>(
                LinearSoftmaxScorer::load(*config.scorer_weights, config.threads));
        });
        scoring->test = stage("score", [&] { return read_latent_matrix(*config.test_latents); });
        scoring->baseline = stage("score", [&] {
            ProbTable t = scoring->scorer->score(scoring->test);
            write_prob_table(t, out_dir / "baseline_probs.tsv");
            return t;
        });
    }

    EvalReport report;
    report.provenance.version = kToolVersion;
    report.provenance.seed = config.seed;
    report.provenance.restarts = config.restarts;
    report.provenance.config_hash = fnv1a_hex(config.canonical_json());
    report.delta = config.delta;
    report.q = config.q;

    for (const std::string& label : manifest.target_classes()) {
        const std::string safe = sanitize_label(label);
        ClassReport cls;
        cls.label = label;

        PairManifest sub;
        for (const auto& e : manifest.entries)
            if (e.target_class == label) sub.entries.push_back(e);

        const LatentMatrix diffs = stage("diff", [&] {
            LatentMatrix d = difference_vectors(factual, counterfactual, sub);
            write_latent_matrix(d, out_dir / ("diff_" + safe + ".cdlc"));
            return d;
        });

        const NormalizeResult norm = stage("normalize", [&] {
            NormalizeResult r = unit_normalize(diffs, config.epsilon_norm);
            write_unit_matrix(r.unit, out_dir / ("unit_" + safe + ".cdlc"));
            ordered_json dropped = ordered_json::array();
            for (const auto& id : r.skipped_ids) dropped.push_back(id);
            write_text_file(dropped.dump(2) + "\n", out_dir / ("dropped_" + safe + ".json"));
            return r;
        });
        cls.n_pairs = sub.entries.size();
        cls.n_dropped = norm.skipped_ids.size();
        const UnitMatrix& unit = norm.unit;

        // Cluster: fixed k when configured, silhouette selection otherwise.
        // Models are cached so the ablation sweep reuses selection runs.
        std::map<std::size_t, ClusterModel> models;
        auto model_for = [&](std::size_t k) -> const ClusterModel& {
            auto it = models.find(k);
            if (it != models.end()) return it->second;
            ClusterModel m = stage("cluster", [&] {
                ClusterModel model = spherical_kmeans(unit, k, config.seed, kopts);
                if (k >= 2 && unit.n >= 2) {
                    model.silhouette = silhouette_cosine(unit, model.assignments, config.threads);
                    model.has_silhouette = true;
                }
                return model;
            });
            return models.emplace(k, std::move(m)).first->second;
        };

        std::size_t chosen_k;
        if (auto it = config.per_class_k.find(label); it != config.per_class_k.end()) {
            chosen_k = it->second;
            model_for(chosen_k);
        } else {
            chosen_k = stage("select-k", [&] {
                if (unit.n < 3)
                    fail(Errc::too_few_points,
                         "class '" + label + "' has too few unit vectors for selection");
                const std::size_t hi = std::min(config.k_max, unit.n - 1);
                if (config.k_min > hi)
                    fail(Errc::too_few_points, "class '" + label + "': k_min exceeds N-1");
                SelectKResult sel = select_k(unit, config.k_min, hi, config.seed, kopts);
                for (auto& [k, m] : sel.models) models.emplace(k, std::move(m));
                return sel.k_star;
            });
        }
        const ClusterModel& chosen = model_for(chosen_k);
        cls.k_star = chosen_k;
        if (chosen.has_silhouette) cls.silhouette = chosen.silhouette;

        const DirectionSet directions = stage("cluster", [&] {
            DirectionSet ds = extract_directions(chosen, label);
            write_direction_set(ds, out_dir / ("directions_" + safe + ".cdlc"));
            return ds;
        });
        if (directions.k >= 2) cls.redundancy_cosine = redundancy(directions);

        // Per-concept traversal sweep and effect metrics at the chosen k.
        if (scoring) {
            std::vector<ProbTable> best_probs;
            for (std::size_t c = 0; c < directions.k; ++c) {
                SweepOutcome sweep = stage("apply", [&] {
                    return sweep_direction(*scoring, directions.direction(c), config.alphas,
                                           label);
                });
                ConceptRecord rec;
                rec.index = c;
                rec.name = "c" + std::to_string(c);
                rec.alpha = sweep.best_alpha;
                rec.sr_fraction = sweep.best_sr;
                rec.sweep = sweep.sweep;
                cls.concepts.push_back(std::move(rec));
                stage("apply", [&] {
                    write_prob_table(sweep.best_probs, out_dir / ("probs_" + safe + "_c" +
                                                                  std::to_string(c) + ".tsv"));
                    return 0;
                });
                best_probs.push_back(std::move(sweep.best_probs));
            }
            const EffectTable effects = stage("evaluate", [&] {
                EffectTable t = effect_table(scoring->baseline, best_probs, label);
                write_effect_table(t, out_dir / ("effects_" + safe + ".tsv"));
                return t;
            });
            const EffectMetrics m = effect_metrics(effects, config.delta, config.q);
            cls.coverage_fraction = m.coverage_fraction;
            cls.best_of_k_prob = m.best_of_k_prob;
            cls.top_q_mean_prob = m.top_q_mean_prob;
        } else {
            for (std::size_t c = 0; c < directions.k; ++c) {
                ConceptRecord rec;
                rec.index = c;
                rec.name = "c" + std::to_string(c);
                cls.concepts.push_back(std::move(rec));
            }
        }

        // Cluster-count ablation over the configured range.
        if (config.ablate_range) {
            const std::size_t lo = config.ablate_range->first;
            const std::size_t hi = std::min(config.ablate_range->second,
                                            unit.n > 0 ? unit.n - 1 : std::size_t{0});
            for (std::size_t k = lo; k <= hi; ++k) {
                const ClusterModel& model = model_for(k);
                AblationRecord rec;
                rec.k = k;
                if (model.has_silhouette) rec.silhouette = model.silhouette;
                const DirectionSet dirs = extract_directions(model, label);
                if (dirs.k >= 2) rec.redundancy_cosine = redundancy(dirs);
                if (scoring) {
                    std::vector<ProbTable> probs;
                    for (std::size_t c = 0; c < dirs.k; ++c) {
                        SweepOutcome sweep = stage("ablate", [&] {
                            return sweep_direction(*scoring, dirs.direction(c), config.alphas,
                                                   label);
                        });
                        probs.push_back(std::move(sweep.best_probs));
                    }
                    const EffectTable effects = stage(
                        "ablate", [&] { return effect_table(scoring->baseline, probs, label); });
                    const EffectMetrics m = effect_metrics(effects, config.delta, config.q);
                    rec.coverage_fraction = m.coverage_fraction;
                    rec.best_of_k_prob = m.best_of_k_prob;
                    rec.top_q_mean_prob = m.top_q_mean_prob;
                }
                cls.ablation.push_back(rec);
            }
        }
        report.classes.push_back(std::move(cls));
    }

    if (config.external_metrics)
        stage("report", [&] {
            merge_external_metrics(report, *config.external_metrics);
            return 0;
        });

    stage("report", [&] {
        write_text_file(report_to_json(report), out_dir / "report.json");
        write_text_file(report_markdown(report), out_dir / "report.md");
        return 0;
    });
    return report;
}

} // namespace cdlc
