#include "cdlc/pipeline.hpp"

#include "cdlc/concept_metrics.hpp"

#include "cdlc/error.hpp"
#include "cdlc/rng.hpp"
#include "cdlc/sphere_cluster.hpp"
#include "cdlc/synth.hpp"
#include "cdlc/tensor_io.hpp"
#include "cdlc/traversal.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <fstream>

using namespace cdlc;
using testutil::TempDir;

namespace {

/// Builds a complete planted-synthetic experiment on disk: factual zeros,
/// counterfactuals equal to scaled planted unit differences, a two-class
/// scorer and random test latents.
struct PlantedPipelineFixture {
    TempDir tmp{"pipe"};
    PipelineConfig config;
    PlantedData data;

    explicit PlantedPipelineFixture(std::size_t k_true = 3, std::size_t d = 8,
                                    std::size_t n = 60) {
        PlantedSpec spec;
        spec.k_true = k_true;
        spec.d = d;
        spec.n = n;
        spec.noise_sigma = 0.05;
        spec.seed = 7;
        data = generate_planted(spec);

        Rng rng(100);
        LatentMatrix factual, counterfactual;
        factual.n = counterfactual.n = n;
        factual.d = counterfactual.d = d;
        factual.data.assign(n * d, 0.0f);
        counterfactual.data.resize(n * d);
        PairManifest manifest;
        for (std::size_t i = 0; i < n; ++i) {
            factual.ids.push_back("f" + std::to_string(i));
            counterfactual.ids.push_back("c" + std::to_string(i));
            const double scale = 0.5 + 2.0 * rng.uniform();
            for (std::size_t j = 0; j < d; ++j)
                counterfactual.data[i * d + j] =
                    static_cast<float>(scale * data.points.row(i)[j]);
            manifest.entries.push_back(
                {factual.ids[i], counterfactual.ids[i], "other", "planted", i + 1});
        }
        write_latent_matrix(factual, tmp.file("factual.cdlc"));
        write_latent_matrix(counterfactual, tmp.file("counterfactual.cdlc"));
        save_pair_manifest(manifest, tmp.file("pairs.tsv"));

        LatentMatrix test;
        test.n = 20;
        test.d = d;
        test.data.resize(test.n * d);
        for (auto& v : test.data) v = static_cast<float>(rng.normal());
        for (std::size_t i = 0; i < test.n; ++i) test.ids.push_back("t" + std::to_string(i));
        write_latent_matrix(test, tmp.file("test.cdlc"));

        std::vector<double> w(2 * d), b(2, 0.0);
        for (auto& v : w) v = rng.normal();
        LinearSoftmaxScorer scorer({"other", "planted"}, w, b, d);
        scorer.save(tmp.file("scorer.json"));

        config.factual = tmp.file("factual.cdlc");
        config.counterfactual = tmp.file("counterfactual.cdlc");
        config.manifest = tmp.file("pairs.tsv");
        config.test_latents = tmp.file("test.cdlc");
        config.scorer_weights = tmp.file("scorer.json");
        config.k_min = 2;
        config.k_max = 6;
        config.alphas = {0.5, 1.0, 2.0};
        config.seed = 3;
        config.restarts = 4;
        config.ablate_range = {{2, 4}};
        config.out_dir = tmp.file("out");
    }
};

} // namespace

TEST_CASE("run_pipeline recovers planted structure end to end") {
    PlantedPipelineFixture fx;
    const EvalReport report = run_pipeline(fx.config);

    REQUIRE(report.classes.size() == 1);
    const ClassReport& cls = report.classes[0];
    CHECK(cls.label == "planted");
    CHECK(cls.n_pairs == 60);
    CHECK(cls.n_dropped == 0);
    CHECK(cls.k_star == 3);
    REQUIRE(cls.redundancy_cosine.has_value());
    CHECK(std::abs(*cls.redundancy_cosine) < 0.2);
    CHECK(cls.concepts.size() == 3);
    for (const auto& con : cls.concepts) {
        REQUIRE(con.sr_fraction.has_value());
        CHECK(*con.sr_fraction >= 0.0);
        CHECK(*con.sr_fraction <= 1.0);
        CHECK(con.sweep.size() == 3);
    }
    CHECK(cls.ablation.size() == 3); // K in {2,3,4}
    REQUIRE(cls.coverage_fraction.has_value());

    SUBCASE("artifacts land in the output directory and reload") {
        const auto out = fx.config.out_dir;
        CHECK(std::filesystem::exists(out / "report.json"));
        CHECK(std::filesystem::exists(out / "report.md"));
        CHECK(std::filesystem::exists(out / "baseline_probs.tsv"));
        const UnitMatrix unit = read_unit_matrix(out / "unit_planted.cdlc");
        CHECK(unit.n == 60);
        const DirectionSet dirs = read_direction_set(out / "directions_planted.cdlc");
        CHECK(dirs.k == 3);
        CHECK(dirs.provenance.n_samples == 60);

        // The written report parses back to the returned value.
        const EvalReport parsed = report_from_json(read_text_file(out / "report.json"));
        CHECK(parsed == report);

        // Recovered directions align with the planted truth.
        const MatchResult match = match_directions(dirs, fx.data.truth);
        CHECK(match.min_cosine >= 0.97);
    }

    SUBCASE("metrics recomputed from the written artifacts match the report") {
        const EffectTable effects =
            read_effect_table(fx.config.out_dir / "effects_planted.tsv");
        CHECK(coverage(effects, report.delta) == *cls.coverage_fraction);
        CHECK(best_of_k(effects) == *cls.best_of_k_prob);
        CHECK(top_q_mean(effects, report.q) == *cls.top_q_mean_prob);

        const ProbTable baseline = read_prob_table(fx.config.out_dir / "baseline_probs.tsv");
        std::vector<ProbTable> per_concept;
        for (std::size_t c = 0; c < cls.concepts.size(); ++c)
            per_concept.push_back(read_prob_table(fx.config.out_dir /
                                                  ("probs_planted_c" + std::to_string(c) + ".tsv")));
        const EffectTable rebuilt = effect_table(baseline, per_concept, "planted");
        CHECK(rebuilt.effects == effects.effects);
    }

    SUBCASE("standalone clustering on the written unit file reproduces directions") {
        const UnitMatrix unit = read_unit_matrix(fx.config.out_dir / "unit_planted.cdlc");
        KmeansOptions opts;
        opts.restarts = fx.config.restarts;
        const ClusterModel model = spherical_kmeans(unit, 3, fx.config.seed, opts);
        const DirectionSet standalone = extract_directions(model, "planted");
        const DirectionSet from_run =
            read_direction_set(fx.config.out_dir / "directions_planted.cdlc");
        const MatchResult match = match_directions(standalone, from_run);
        CHECK(match.min_cosine >= 1.0 - 1e-6);
    }
}

TEST_CASE("reports are byte-identical across reruns and thread counts") {
    PlantedPipelineFixture fx;

    fx.config.out_dir = fx.tmp.file("out1");
    run_pipeline(fx.config);
    const std::string first = read_text_file(fx.tmp.file("out1") / "report.json");

    fx.config.out_dir = fx.tmp.file("out2");
    run_pipeline(fx.config);
    const std::string second = read_text_file(fx.tmp.file("out2") / "report.json");
    CHECK(first == second);

    fx.config.out_dir = fx.tmp.file("out4");
    fx.config.threads = 4;
    run_pipeline(fx.config);
    const std::string threaded = read_text_file(fx.tmp.file("out4") / "report.json");
    CHECK(first == threaded);
}

TEST_CASE("pipeline failure modes") {
    PlantedPipelineFixture fx;

    SUBCASE("an empty manifest fails at the diff stage naming the path") {
        std::ofstream(fx.config.manifest) << "# nothing here\n";
        try {
            run_pipeline(fx.config);
            FAIL("expected an error");
        } catch (const Error& e) {
            const std::string msg = e.what();
            CHECK(msg.find("diff stage") != std::string::npos);
            CHECK(msg.find("pairs.tsv") != std::string::npos);
        }
    }

    SUBCASE("a held lock refuses a second run") {
        std::filesystem::create_directories(fx.config.out_dir);
        std::ofstream(fx.config.out_dir / ".cdlc.lock") << "held\n";
        try {
            run_pipeline(fx.config);
            FAIL("expected LockHeld");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::lock_held);
        }
    }

    SUBCASE("missing input files are configuration errors") {
        fx.config.factual = fx.tmp.file("missing.cdlc");
        try {
            run_pipeline(fx.config);
            FAIL("expected BadConfig");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::bad_config);
        }
    }

    SUBCASE("bad thresholds are configuration errors") {
        fx.config.q = 1.5;
        CHECK_THROWS_AS(run_pipeline(fx.config), Error);
    }
}

TEST_CASE("per-class fixed k wins over selection") {
    PlantedPipelineFixture fx;
    fx.config.per_class_k = {{"planted", 4}};
    fx.config.out_dir = fx.tmp.file("out_fixed");
    const EvalReport report = run_pipeline(fx.config);
    CHECK(report.classes[0].k_star == 4);
    CHECK(report.classes[0].concepts.size() == 4);
    const DirectionSet dirs = read_direction_set(fx.tmp.file("out_fixed") / "directions_planted.cdlc");
    CHECK(dirs.k == 4);
}

TEST_CASE("classes cluster independently, in manifest order") {
    TempDir tmp("multi");
    // Two target classes with different planted structures: "alpha" has 2
    // directions, "beta" has 4. "alpha" gets a fixed k from the config map,
    // "beta" goes through silhouette selection.
    PlantedSpec sa;
    sa.k_true = 2;
    sa.d = 8;
    sa.n = 40;
    sa.noise_sigma = 0.05;
    sa.seed = 1;
    PlantedSpec sb = sa;
    sb.k_true = 4;
    sb.seed = 2;
    const PlantedData da = generate_planted(sa);
    const PlantedData db = generate_planted(sb);

    LatentMatrix factual, counterfactual;
    factual.d = counterfactual.d = 8;
    PairManifest manifest;
    auto add_class = [&](const PlantedData& data, const std::string& label,
                         const std::string& prefix) {
        for (std::size_t i = 0; i < data.points.n; ++i) {
            const std::string fid = prefix + "f" + std::to_string(i);
            const std::string cid = prefix + "c" + std::to_string(i);
            factual.ids.push_back(fid);
            counterfactual.ids.push_back(cid);
            for (std::size_t j = 0; j < 8; ++j) {
                factual.data.push_back(0.0f);
                counterfactual.data.push_back(static_cast<float>(data.points.row(i)[j]));
            }
            ++factual.n;
            ++counterfactual.n;
            manifest.entries.push_back({fid, cid, "other", label, manifest.entries.size() + 1});
        }
    };
    // beta first in the manifest, so it must come first in the report.
    add_class(db, "beta", "b");
    add_class(da, "alpha", "a");
    write_latent_matrix(factual, tmp.file("f.cdlc"));
    write_latent_matrix(counterfactual, tmp.file("cf.cdlc"));
    save_pair_manifest(manifest, tmp.file("pairs.tsv"));

    PipelineConfig config;
    config.factual = tmp.file("f.cdlc");
    config.counterfactual = tmp.file("cf.cdlc");
    config.manifest = tmp.file("pairs.tsv");
    config.per_class_k = {{"alpha", 2}};
    config.k_min = 2;
    config.k_max = 6;
    config.seed = 9;
    config.restarts = 5;
    config.out_dir = tmp.file("out");
    const EvalReport report = run_pipeline(config);

    REQUIRE(report.classes.size() == 2);
    CHECK(report.classes[0].label == "beta");
    CHECK(report.classes[1].label == "alpha");
    CHECK(report.classes[0].k_star == 4); // silhouette-selected
    CHECK(report.classes[1].k_star == 2); // fixed by config

    const DirectionSet beta_dirs = read_direction_set(config.out_dir / "directions_beta.cdlc");
    const MatchResult match = match_directions(beta_dirs, db.truth);
    CHECK(match.min_cosine >= 0.97);
    const DirectionSet alpha_dirs = read_direction_set(config.out_dir / "directions_alpha.cdlc");
    CHECK(alpha_dirs.k == 2);
    CHECK(alpha_dirs.provenance.n_samples == 40);
}

TEST_CASE("external metrics merge into matching concepts") {
    PlantedPipelineFixture fx;
    const std::string ext = R"({
  "classes": [
    {"label": "planted",
     "concepts": [
       {"index": 0, "name": "Concept A", "lpips": 0.12, "fid": 30.5,
        "tcav_mean": 0.97, "tcav_std": 0.02}
     ]}
  ]
})";
    write_text_file(ext, fx.tmp.file("ext.json"));
    fx.config.external_metrics = fx.tmp.file("ext.json");
    fx.config.out_dir = fx.tmp.file("out_ext");
    const EvalReport report = run_pipeline(fx.config);
    const ConceptRecord& con = report.classes[0].concepts[0];
    CHECK(con.name == "Concept A");
    CHECK(con.lpips == 0.12);
    CHECK(con.fid == 30.5);
    CHECK(con.tcav_mean == 0.97);

    const std::string md = read_text_file(fx.tmp.file("out_ext") / "report.md");
    CHECK(md.find("| Concept A |") != std::string::npos);
    CHECK(md.find("0.12") != std::string::npos);
    CHECK(md.find("30.5") != std::string::npos);
}

TEST_CASE("config files parse with overrides and hash deterministically") {
    PlantedPipelineFixture fx;
    const std::string config_json = R"({
  "factual": "factual.cdlc",
  "counterfactual": "counterfactual.cdlc",
  "manifest": "pairs.tsv",
  "test_latents": "test.cdlc",
  "scorer_weights": "scorer.json",
  "k_range": [2, 6],
  "alphas": [0.5, 1.0, 2.0],
  "seed": 3,
  "restarts": 4,
  "ablate_range": [2, 4],
  "out_dir": "out_cfg"
})";
    write_text_file(config_json, fx.tmp.file("config.json"));
    PipelineConfig parsed = PipelineConfig::from_json_file(fx.tmp.file("config.json"));
    CHECK(parsed.factual == fx.config.factual);
    CHECK(parsed.k_max == 6);
    CHECK(parsed.alphas == fx.config.alphas);
    REQUIRE(parsed.ablate_range.has_value());
    CHECK(parsed.ablate_range->second == 4);

    // Threads and out_dir do not affect the config hash.
    PipelineConfig a = parsed;
    PipelineConfig b = parsed;
    b.threads = 8;
    b.out_dir = fx.tmp.file("elsewhere");
    CHECK(fnv1a_hex(a.canonical_json()) == fnv1a_hex(b.canonical_json()));
    b.seed = 99;
    CHECK(fnv1a_hex(a.canonical_json()) != fnv1a_hex(b.canonical_json()));
}

TEST_CASE("labels are sanitized for file names") {
    CHECK(sanitize_label("a b/c") == "a_b_c");
    CHECK(sanitize_label("Melanoma") == "Melanoma");
    CHECK(sanitize_label("") == "unnamed");
}
