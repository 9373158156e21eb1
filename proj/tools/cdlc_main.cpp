// Command-line front end for the concept-direction toolkit. Subcommands
// mirror the pipeline stages so each stage can run standalone on the same
// file formats the pipeline writes.

#include "cdlc/concept_metrics.hpp"
#include "cdlc/distribution_metrics.hpp"
#include "cdlc/error.hpp"
#include "cdlc/latent_diff.hpp"
#include "cdlc/pipeline.hpp"
#include "cdlc/report.hpp"
#include "cdlc/sphere_cluster.hpp"
#include "cdlc/strfmt.hpp"
#include "cdlc/synth.hpp"
#include "cdlc/tcav.hpp"
#include "cdlc/tensor_io.hpp"
#include "cdlc/traversal.hpp"
#include "cdlc/version.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>

namespace {

using namespace cdlc;
using ordered_json = nlohmann::ordered_json;

int exit_code_for(Errc c) {
    if (c == Errc::bad_config || c == Errc::lock_held) return 2;
    if (is_numeric_error(c)) return 4;
    return 3;
}

struct KmeansFlags {
    std::uint64_t seed = 0;
    std::size_t restarts = 10;
    std::size_t max_iter = 300;
    double tol = 1e-9;
    unsigned threads = 1;

    void attach(CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Random seed")->envname("CDLC_SEED");
        cmd->add_option("--restarts", restarts, "Independent k-means restarts");
        cmd->add_option("--max-iter", max_iter, "Iteration cap per restart");
        cmd->add_option("--tol", tol, "Objective improvement tolerance");
        cmd->add_option("--threads", threads, "Worker threads (results are thread-count independent)");
    }

    KmeansOptions options() const {
        KmeansOptions o;
        o.restarts = restarts;
        o.max_iter = max_iter;
        o.tol = tol;
        o.threads = threads;
        return o;
    }
};

std::vector<double> parse_alpha_list(const std::string& csv) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const std::size_t comma = csv.find(',', start);
        const std::string token =
            csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (token.empty()) fail(Errc::bad_config, "empty entry in alpha list");
        try {
            out.push_back(std::stod(token));
        } catch (const std::exception&) {
            fail(Errc::bad_config, "bad alpha '" + token + "'");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    AlphaSweep sweep{out};
    sweep.validate();
    return out;
}

/// Splits "40,45,50" into the raw tokens too, so output file names carry the
/// exact spelling the caller used.
std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        const std::size_t comma = csv.find(',', start);
        out.push_back(csv.substr(start, comma == std::string::npos ? std::string::npos
                                                                   : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

void cmd_diff(const std::string& factual, const std::string& counterfactual,
              const std::string& manifest_path, const std::string& out,
              const std::string& class_filter) {
    const LatentMatrix f = read_latent_matrix(factual);
    const LatentMatrix cf = read_latent_matrix(counterfactual);
    PairManifest manifest = load_pair_manifest(manifest_path);
    if (!class_filter.empty()) {
        PairManifest filtered;
        for (const auto& e : manifest.entries)
            if (e.target_class == class_filter) filtered.entries.push_back(e);
        manifest = std::move(filtered);
    }
    if (manifest.entries.empty())
        fail(Errc::bad_format, "manifest '" + manifest_path + "' contains no entries" +
                                   (class_filter.empty() ? "" : " for class '" + class_filter + "'"));
    manifest.validate_against(f, cf);
    const LatentMatrix diffs = difference_vectors(f, cf, manifest);
    write_latent_matrix(diffs, out);
    std::cout << "wrote " << diffs.n << " x " << diffs.d << " difference rows to " << out << "\n";
}

void cmd_normalize(const std::string& in, const std::string& out, double epsilon,
                   const std::string& dropped_out) {
    const LatentMatrix diffs = read_latent_matrix(in);
    const NormalizeResult res = unit_normalize(diffs, epsilon);
    write_unit_matrix(res.unit, out);
    if (!dropped_out.empty()) {
        ordered_json j = ordered_json::array();
        for (const auto& id : res.skipped_ids) j.push_back(id);
        write_text_file(j.dump(2) + "\n", dropped_out);
    }
    std::cout << "wrote " << res.unit.n << " unit rows to " << out << "; dropped "
              << res.skipped_ids.size() << " degenerate row(s)\n";
    for (const auto& id : res.skipped_ids) std::cerr << "dropped: " << id << "\n";
}

void cmd_cluster(const std::string& points_path, std::size_t k, const std::string& class_label,
                 const std::string& out, const std::string& model_out, const KmeansFlags& flags) {
    const UnitMatrix points = read_unit_matrix(points_path);
    ClusterModel model = spherical_kmeans(points, k, flags.seed, flags.options());
    if (k >= 2 && points.n >= 2) {
        model.silhouette = silhouette_cosine(points, model.assignments, flags.threads);
        model.has_silhouette = true;
    }
    const DirectionSet dirs = extract_directions(model, class_label);
    write_direction_set(dirs, out);
    if (!model_out.empty()) {
        ordered_json j;
        j["k"] = model.k;
        j["objective"] = model.objective;
        j["silhouette"] = model.has_silhouette ? ordered_json(model.silhouette) : ordered_json();
        j["iterations"] = model.iterations;
        j["restarts_used"] = model.restarts_used;
        j["seed"] = model.seed;
        j["objective_log"] = model.objective_log;
        j["assignments"] = model.assignments;
        write_text_file(j.dump(2) + "\n", model_out);
    }
    std::cout << "k=" << k << " objective=" << fmt_double(model.objective);
    if (model.has_silhouette) std::cout << " silhouette=" << fmt_double(model.silhouette);
    std::cout << " -> " << out << "\n";
}

void cmd_select_k(const std::string& points_path, const std::string& class_label,
                  std::size_t k_min, std::size_t k_max, const std::string& out_dir,
                  const KmeansFlags& flags) {
    const UnitMatrix points = read_unit_matrix(points_path);
    const SelectKResult sel = select_k(points, k_min, k_max, flags.seed, flags.options());
    std::filesystem::create_directories(out_dir);
    const std::string safe = sanitize_label(class_label);
    ordered_json summary;
    summary["class"] = class_label;
    summary["k_star"] = sel.k_star;
    summary["candidates"] = ordered_json::array();
    for (const auto& [k, model] : sel.models) {
        const DirectionSet dirs = extract_directions(model, class_label);
        write_direction_set(dirs, std::filesystem::path(out_dir) /
                                      ("directions_" + safe + "_k" + std::to_string(k) + ".cdlc"));
        summary["candidates"].push_back({{"k", k},
                                         {"silhouette", model.silhouette},
                                         {"objective", model.objective},
                                         {"iterations", model.iterations}});
    }
    write_text_file(summary.dump(2) + "\n",
                    std::filesystem::path(out_dir) / ("selectk_" + safe + ".json"));
    std::cout << "k_star=" << sel.k_star << " over [" << k_min << ", " << k_max << "]\n";
}

void cmd_apply(const std::string& directions_path, const std::string& latents_path,
               const std::string& alpha_csv, const std::string& out_dir) {
    const DirectionSet dirs = read_direction_set(directions_path);
    const LatentMatrix latents = read_latent_matrix(latents_path);
    const std::vector<double> alphas = parse_alpha_list(alpha_csv);
    const std::vector<std::string> tokens = split_csv(alpha_csv);
    std::filesystem::create_directories(out_dir);
    std::size_t written = 0;
    for (std::size_t c = 0; c < dirs.k; ++c) {
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            const LatentMatrix moved = apply_direction(latents, dirs.direction(c), alphas[a]);
            const std::string name =
                "manipulated_c" + std::to_string(c) + "_a" + sanitize_label(tokens[a]) + ".cdlc";
            write_latent_matrix(moved, std::filesystem::path(out_dir) / name);
            ++written;
        }
    }
    std::cout << "wrote " << written << " manipulated matrices to " << out_dir << "\n";
}

struct EvaluateArgs {
    std::vector<std::string> fid_paths;
    bool tcav = false;
    std::string concept_path, negatives_path, grads_path;
    std::size_t runs = 10;
    double l2 = 1e-3;
    bool sr = false;
    std::string baseline_path, target;
    std::vector<std::string> manipulated_paths;
    double delta = 0.05, q = 0.3;
    bool effects = false;
    std::string effects_out;
    std::string redundancy_path;
    std::uint64_t seed = 0;
};

void cmd_evaluate(const EvaluateArgs& a) {
    int modes = 0;
    modes += !a.fid_paths.empty();
    modes += a.tcav;
    modes += a.sr;
    modes += a.effects;
    modes += !a.redundancy_path.empty();
    if (modes != 1)
        fail(Errc::bad_config,
             "pick exactly one of --fid, --tcav, --sr, --effects, --redundancy");

    if (!a.fid_paths.empty()) {
        const GaussianStats real = gaussian_stats(read_latent_matrix(a.fid_paths[0]));
        const GaussianStats gen = gaussian_stats(read_latent_matrix(a.fid_paths[1]));
        std::cout << "fid=" << fmt_double(frechet_distance(real, gen)) << "\n";
        return;
    }
    if (a.tcav) {
        if (a.concept_path.empty() || a.negatives_path.empty() || a.grads_path.empty())
            fail(Errc::bad_config, "--tcav requires --concept, --negatives and --grads");
        const LatentMatrix concept_acts = read_latent_matrix(a.concept_path);
        const LatentMatrix negatives = read_latent_matrix(a.negatives_path);
        const LatentMatrix grads = read_latent_matrix(a.grads_path);
        const TcavRuns runs = tcav_runs(concept_acts, negatives, grads, a.runs, a.seed, a.l2);
        std::cout << "tcav=" << fmt_fixed(runs.mean, 2) << "±" << fmt_fixed(runs.std_dev, 2)
                  << " (mean=" << fmt_double(runs.mean) << " std=" << fmt_double(runs.std_dev)
                  << " runs=" << runs.per_run.size() << ")\n";
        return;
    }
    if (a.sr) {
        if (a.baseline_path.empty() || a.manipulated_paths.size() != 1 || a.target.empty())
            fail(Errc::bad_config, "--sr requires --baseline, one --manipulated and --target");
        const ProbTable baseline = read_prob_table(a.baseline_path);
        const ProbTable manipulated = read_prob_table(a.manipulated_paths[0]);
        std::cout << "sr=" << fmt_double(success_rate(baseline, manipulated, a.target)) << "\n";
        return;
    }
    if (a.effects) {
        if (a.baseline_path.empty() || a.manipulated_paths.empty() || a.target.empty())
            fail(Errc::bad_config, "--effects requires --baseline, --manipulated and --target");
        const ProbTable baseline = read_prob_table(a.baseline_path);
        std::vector<ProbTable> manipulated;
        manipulated.reserve(a.manipulated_paths.size());
        for (const auto& p : a.manipulated_paths) manipulated.push_back(read_prob_table(p));
        const EffectTable table = effect_table(baseline, manipulated, a.target);
        if (!a.effects_out.empty()) write_effect_table(table, a.effects_out);
        std::cout << "coverage=" << fmt_double(coverage(table, a.delta))
                  << " best_of_k=" << fmt_double(best_of_k(table))
                  << " top_q_mean=" << fmt_double(top_q_mean(table, a.q)) << "\n";
        return;
    }
    const DirectionSet dirs = read_direction_set(a.redundancy_path);
    std::cout << "redundancy=" << fmt_double(redundancy(dirs)) << "\n";
}

struct AblateArgs {
    std::string points_path, class_label;
    std::size_t k_min = 4, k_max = 9; // matches the reference ablation range
    std::string test_latents, scorer_weights, alpha_csv;
    double delta = 0.05, q = 0.3;
    std::string json_out, md_out;
    KmeansFlags flags;
};

void cmd_ablate(const AblateArgs& a) {
    const UnitMatrix points = read_unit_matrix(a.points_path);
    if (points.n < 2 || a.k_max > points.n - 1)
        fail(Errc::too_few_points, "ablation requires k_max <= N-1");
    const SelectKResult sel = select_k(points, a.k_min, a.k_max, a.flags.seed, a.flags.options());

    std::optional<LinearSoftmaxScorer> scorer;
    LatentMatrix test;
    ProbTable baseline;
    std::vector<double> alphas;
    const bool scored = !a.test_latents.empty() && !a.scorer_weights.empty() &&
                        !a.alpha_csv.empty();
    if (scored) {
        scorer.emplace(LinearSoftmaxScorer::load(a.scorer_weights, a.flags.threads));
        test = read_latent_matrix(a.test_latents);
        baseline = scorer->score(test);
        alphas = parse_alpha_list(a.alpha_csv);
    }

    EvalReport report;
    report.provenance.version = kToolVersion;
    report.provenance.seed = a.flags.seed;
    report.provenance.restarts = a.flags.restarts;
    report.provenance.config_hash = fnv1a_hex("ablate:" + a.points_path);
    report.delta = a.delta;
    report.q = a.q;
    ClassReport cls;
    cls.label = a.class_label;
    cls.n_pairs = points.n;
    cls.k_star = sel.k_star;

    for (const auto& [k, model] : sel.models) {
        AblationRecord rec;
        rec.k = k;
        rec.silhouette = model.silhouette;
        const DirectionSet dirs = extract_directions(model, a.class_label);
        if (dirs.k >= 2) rec.redundancy_cosine = redundancy(dirs);
        if (scored) {
            std::vector<ProbTable> best;
            for (std::size_t c = 0; c < dirs.k; ++c) {
                ProbTable best_probs;
                double best_sr = -1.0;
                for (double alpha : alphas) {
                    ProbTable probs = scorer->score(apply_direction(test, dirs.direction(c), alpha));
                    const double sr = success_rate(baseline, probs, a.class_label);
                    if (sr > best_sr) {
                        best_sr = sr;
                        best_probs = std::move(probs);
                    }
                }
                best.push_back(std::move(best_probs));
            }
            const EffectTable effects = effect_table(baseline, best, a.class_label);
            rec.coverage_fraction = coverage(effects, a.delta);
            rec.best_of_k_prob = best_of_k(effects);
            rec.top_q_mean_prob = top_q_mean(effects, a.q);
        }
        cls.ablation.push_back(rec);
    }
    report.classes.push_back(std::move(cls));

    if (!a.json_out.empty()) write_text_file(report_to_json(report), a.json_out);
    if (!a.md_out.empty()) write_text_file(ablation_table_markdown(report), a.md_out);
    if (a.json_out.empty() && a.md_out.empty()) std::cout << ablation_table_markdown(report);
    std::cout << "k_star=" << sel.k_star << "\n";
}

void cmd_synth(std::size_t k_true, std::size_t dim, std::size_t n, double noise,
               std::uint64_t seed, const std::string& mixing_csv, const std::string& out,
               const std::string& truth_out) {
    PlantedSpec spec;
    spec.k_true = k_true;
    spec.d = dim;
    spec.n = n;
    spec.noise_sigma = noise;
    spec.seed = seed;
    if (!mixing_csv.empty()) spec.mixing = parse_alpha_list(mixing_csv);
    const PlantedData data = generate_planted(spec);
    write_unit_matrix(data.points, out);
    if (!truth_out.empty()) write_direction_set(data.truth, truth_out);
    ordered_json labels = ordered_json::array();
    for (auto l : data.labels) labels.push_back(l);
    write_text_file(labels.dump() + "\n", out + ".labels.json");
    std::cout << "wrote " << n << " planted points (k_true=" << k_true << ", d=" << dim << ") to "
              << out << "\n";
}

void cmd_run(const std::string& config_path, const std::optional<std::uint64_t>& seed_override,
             const std::string& out_dir_override, unsigned threads) {
    PipelineConfig config = PipelineConfig::from_json_file(config_path);
    if (seed_override) config.seed = *seed_override;
    if (!out_dir_override.empty()) config.out_dir = out_dir_override;
    config.threads = threads;
    const EvalReport report = run_pipeline(config);
    for (const auto& cls : report.classes) {
        std::cout << "class " << cls.label << ": k_star=" << cls.k_star;
        if (cls.silhouette) std::cout << " silhouette=" << fmt_double(*cls.silhouette);
        if (cls.redundancy_cosine)
            std::cout << " redundancy=" << fmt_double(*cls.redundancy_cosine);
        std::cout << " (" << cls.n_pairs << " pairs, " << cls.n_dropped << " dropped)\n";
    }
    std::cout << "report written to " << (config.out_dir / "report.json").string() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Concept-direction discovery and evaluation toolkit"};
    app.set_version_flag("--version", cdlc::kToolVersion);
    app.require_subcommand(1);

    // diff
    std::string d_factual, d_counterfactual, d_manifest, d_out, d_class;
    auto* diff = app.add_subcommand("diff", "Compute counterfactual - factual latent differences");
    diff->add_option("--factual", d_factual)->required();
    diff->add_option("--counterfactual", d_counterfactual)->required();
    diff->add_option("--manifest", d_manifest)->required();
    diff->add_option("--out", d_out)->required();
    diff->add_option("--class", d_class, "Keep only pairs targeting this class");

    // normalize
    std::string n_in, n_out, n_dropped;
    double n_epsilon = 1e-8;
    auto* normalize = app.add_subcommand("normalize", "Project difference rows onto the unit sphere");
    normalize->add_option("--in", n_in)->required();
    normalize->add_option("--out", n_out)->required();
    normalize->add_option("--epsilon", n_epsilon, "Minimum difference norm");
    normalize->add_option("--dropped-out", n_dropped, "Write dropped ids to this JSON file");

    // cluster
    std::string c_points, c_class = "unlabeled", c_out, c_model_out;
    std::size_t c_k = 0;
    KmeansFlags c_flags;
    auto* cluster = app.add_subcommand("cluster", "Spherical k-means at a fixed k");
    cluster->add_option("--points", c_points)->required();
    cluster->add_option("--k", c_k)->required();
    cluster->add_option("--class", c_class, "Class label recorded in provenance");
    cluster->add_option("--out", c_out, "Direction set output")->required();
    cluster->add_option("--model-out", c_model_out, "Optional model JSON (assignments, objective log)");
    c_flags.attach(cluster);

    // select-k
    std::string s_points, s_class = "unlabeled", s_out_dir = ".";
    std::size_t s_k_min = 2, s_k_max = 12;
    KmeansFlags s_flags;
    auto* selectk = app.add_subcommand("select-k", "Pick k by the highest silhouette");
    selectk->add_option("--points", s_points)->required();
    selectk->add_option("--class", s_class);
    selectk->add_option("--k-min", s_k_min);
    selectk->add_option("--k-max", s_k_max);
    selectk->add_option("--out-dir", s_out_dir);
    s_flags.attach(selectk);

    // apply
    std::string a_directions, a_latents, a_alphas, a_out_dir = ".";
    auto* apply = app.add_subcommand("apply", "Add alpha-scaled directions to latents");
    apply->add_option("--directions", a_directions)->required();
    apply->add_option("--latents", a_latents)->required();
    apply->add_option("--alpha-list", a_alphas, "Comma-separated strictly increasing strengths")
        ->required();
    apply->add_option("--out-dir", a_out_dir);

    // evaluate
    EvaluateArgs e;
    auto* evaluate = app.add_subcommand("evaluate", "Metric computations on saved artifacts");
    evaluate->add_option("--fid", e.fid_paths, "Two feature matrices: real generated")
        ->expected(2);
    evaluate->add_flag("--tcav", e.tcav, "Concept-activation-vector scoring");
    evaluate->add_option("--concept", e.concept_path);
    evaluate->add_option("--negatives", e.negatives_path);
    evaluate->add_option("--grads", e.grads_path);
    evaluate->add_option("--runs", e.runs);
    evaluate->add_option("--l2", e.l2, "CAV logistic L2 regularization");
    evaluate->add_flag("--sr", e.sr, "Success rate of one manipulated table");
    evaluate->add_flag("--effects", e.effects, "Effect-table metrics over concept tables");
    evaluate->add_option("--baseline", e.baseline_path);
    evaluate->add_option("--manipulated", e.manipulated_paths)->delimiter(',');
    evaluate->add_option("--target", e.target);
    evaluate->add_option("--delta", e.delta);
    evaluate->add_option("--q", e.q);
    evaluate->add_option("--effects-out", e.effects_out, "Write the effect table here");
    evaluate->add_option("--redundancy", e.redundancy_path, "Direction set to score");
    evaluate->add_option("--seed", e.seed)->envname("CDLC_SEED");

    // ablate
    AblateArgs ab;
    auto* ablate = app.add_subcommand("ablate", "Cluster-count ablation table");
    ablate->add_option("--points", ab.points_path)->required();
    ablate->add_option("--class", ab.class_label)->required();
    ablate->add_option("--k-min", ab.k_min);
    ablate->add_option("--k-max", ab.k_max);
    ablate->add_option("--test-latents", ab.test_latents);
    ablate->add_option("--scorer", ab.scorer_weights, "Linear-softmax weights JSON");
    ablate->add_option("--alpha-list", ab.alpha_csv);
    ablate->add_option("--delta", ab.delta);
    ablate->add_option("--q", ab.q);
    ablate->add_option("--json-out", ab.json_out);
    ablate->add_option("--md-out", ab.md_out);
    ab.flags.attach(ablate);

    // synth
    std::size_t sy_k = 4, sy_d = 64, sy_n = 2000;
    double sy_noise = 0.15;
    std::uint64_t sy_seed = 1;
    std::string sy_mix, sy_out, sy_truth;
    auto* synth = app.add_subcommand("synth", "Planted-direction synthetic data");
    synth->add_option("--k-true", sy_k);
    synth->add_option("--dim", sy_d);
    synth->add_option("--n", sy_n);
    synth->add_option("--noise", sy_noise);
    synth->add_option("--seed", sy_seed)->envname("CDLC_SEED");
    synth->add_option("--mixing", sy_mix, "Comma-separated cluster proportions");
    synth->add_option("--out", sy_out)->required();
    synth->add_option("--truth", sy_truth, "Write planted directions here");

    // run
    std::string r_config, r_out_dir;
    std::optional<std::uint64_t> r_seed;
    unsigned r_threads = 1;
    auto* run = app.add_subcommand("run", "Full pipeline from a JSON config");
    run->add_option("--config,-c", r_config)->required();
    run->add_option("--seed", r_seed, "Overrides the config seed")->envname("CDLC_SEED");
    run->add_option("--out-dir", r_out_dir, "Overrides the config output directory");
    run->add_option("--threads", r_threads);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*diff) cmd_diff(d_factual, d_counterfactual, d_manifest, d_out, d_class);
        if (*normalize) cmd_normalize(n_in, n_out, n_epsilon, n_dropped);
        if (*cluster) cmd_cluster(c_points, c_k, c_class, c_out, c_model_out, c_flags);
        if (*selectk) cmd_select_k(s_points, s_class, s_k_min, s_k_max, s_out_dir, s_flags);
        if (*apply) cmd_apply(a_directions, a_latents, a_alphas, a_out_dir);
        if (*evaluate) cmd_evaluate(e);
        if (*ablate) cmd_ablate(ab);
        if (*synth) cmd_synth(sy_k, sy_d, sy_n, sy_noise, sy_seed, sy_mix, sy_out, sy_truth);
        if (*run) cmd_run(r_config, r_seed, r_out_dir, r_threads);
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return exit_code_for(err.code());
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 3;
    }
    return 0;
}
