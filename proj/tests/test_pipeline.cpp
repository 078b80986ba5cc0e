#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraudkit/errors.hpp"
#include "fraudkit/pipeline.hpp"
#include "fraudkit/rng.hpp"
#include "test_support.hpp"

using namespace fraudkit;
namespace fs = std::filesystem;

namespace {

// Synthetic six-timestep dataset with a 2/3/4/5 chronological split.
struct Fixture {
    support::TempDir dir;
    support::DiskDataset data;
    PipelineConfig cfg;

    explicit Fixture(std::uint64_t seed = 9, std::size_t per_t = 30, int timesteps = 6)
        : data(support::write_synthetic_dataset(dir.path(), seed, per_t, timesteps)) {
        cfg.features_csv = data.features;
        cfg.edges_csv = data.edges;
        cfg.classes_csv = data.classes;
        cfg.out_dir = dir.path() / "out";
        cfg.split.train_end = 2;
        cfg.split.val_start = 3;
        cfg.split.val_end = 4;
        cfg.split.test_start = 5;
        cfg.train.n_trees = 40;
        cfg.train.max_depth = 8;
        cfg.topk = {5, 10, 20};
        cfg.importance_repeats = 3;
    }
};

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return nlohmann::json::parse(in);
}

int run_cli(const std::string& args, const fs::path& capture) {
    std::string command = std::string(FRAUDKIT_CLI_PATH) + " " + args + " > " +
                          capture.string() + " 2>&1";
    int status = std::system(command.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("end-to-end run emits every documented artifact") {
    Fixture fx;
    auto extracted = run_extract(fx.cfg, "both");
    REQUIRE(extracted.causal_csv.has_value());
    REQUIRE(extracted.full_csv.has_value());

    // Both matrices cover the same rows in the same canonical order; only
    // provenance (and values at non-final timesteps) differ.
    auto causal = read_feature_csv(*extracted.causal_csv);
    auto full = read_feature_csv(*extracted.full_csv);
    CHECK(causal.row_ids == full.row_ids);
    CHECK(causal.row_times == full.row_times);
    CHECK(causal.columns == full.columns);

    // Provenance travels in each matrix's sidecar manifest.
    auto causal_side = read_json(fs::path(extracted.causal_csv->string() + ".manifest.json"));
    auto full_side = read_json(fs::path(extracted.full_csv->string() + ".manifest.json"));
    CHECK(causal_side.at("provenance") == "causal");
    CHECK(full_side.at("provenance") == "full");
    CHECK(causal_side.at("rows").get<std::size_t>() == causal.rows());

    auto audit = run_audit(fx.cfg, *extracted.causal_csv, *extracted.full_csv, 1e-9);
    CHECK(fs::exists(audit.columns_csv));
    CHECK(fs::exists(audit.timesteps_csv));
    CHECK(support::slurp(audit.columns_csv).rfind("column,differing_fraction,mean_abs_diff",
                                                  0) == 0);

    auto model_path = run_train(fx.cfg);
    REQUIRE(fs::exists(model_path));
    auto mj = read_json(model_path);
    CHECK(mj.at("format") == "fraudkit-forest");
    REQUIRE(mj.contains("pipeline"));
    CHECK(mj["pipeline"].at("version") == kVersionString);
    CHECK(mj["pipeline"].at("feature_config") == "TG");
    CHECK(mj["pipeline"]["calibrators"].contains("sigmoid"));
    CHECK(mj["pipeline"]["calibrators"].contains("isotonic"));
    CHECK(fs::exists(fx.cfg.out_dir / "validation_metrics.json"));

    run_evaluate(fx.cfg, model_path);
    auto summary = read_json(fx.cfg.out_dir / "summary.json");
    CHECK(summary.at("version") == kVersionString);
    CHECK(summary.at("feature_config") == "TG");
    CHECK(summary.at("model_fingerprint") == mj["schema"].at("fingerprint"));

    for (const char* split : {"validation", "test"}) {
        const auto& sj = summary.at("splits").at(split);
        CHECK(sj.at("n").get<std::size_t>() >  0);
        for (const char* variant : {"raw", "sigmoid", "isotonic"}) {
            const auto& vj = sj.at("variants").at(variant);
            double auc = vj.at("roc_auc").get<double>();
            CHECK(auc >= 0.0);
            CHECK(auc <= 1.0);
            CHECK(vj.at("brier").get<double>() >= 0.0);
            const auto& confusions = vj.at("confusions");
            REQUIRE(confusions.size() >= 2);
            CHECK(confusions[0].at("name") == "fixed_0.5");
            CHECK(confusions[1].at("name") == "fixed_0.8");
            // The three default validation-selected objectives follow; an
            // infeasible bound reports threshold null instead of failing.
            REQUIRE(confusions.size() == 5);
            CHECK(confusions[2].at("name") == "max_f1");
            for (const auto& pk : vj.at("precision_at_k")) {
                CHECK(pk.at("k").get<std::size_t>() <= sj.at("n").get<std::size_t>());
                CHECK(pk.at("precision").get<double>() >= 0.0);
            }
            for (const char* kind : {"roc", "pr", "sweep", "reliability", "topk"}) {
                fs::path curve = fx.cfg.out_dir / (std::string(kind) + "_" + split + "_" +
                                                   variant + ".csv");
                CHECK(fs::exists(curve));
            }
        }
    }
    CHECK(fs::exists(fx.cfg.out_dir / "permutation_importance.csv"));
    CHECK(fs::exists(fx.cfg.out_dir / "fraud_rate_by_timestep.csv"));
    CHECK(fs::exists(fx.cfg.out_dir / "feature_label_correlation.csv"));

    // Every artifact is manifest-listed with a digest, and the manifest echoes
    // the config verbatim.
    auto manifest = read_json(fx.cfg.out_dir / "evaluate_manifest.json");
    CHECK(manifest.at("command") == "evaluate");
    CHECK(manifest.at("config") == fx.cfg.to_json());
    CHECK(manifest.at("artifacts").contains("summary.json"));
    CHECK(manifest.at("artifacts").contains("roc_test_raw.csv"));
    CHECK(manifest.at("inputs").contains(fx.cfg.features_csv.string()));
}

TEST_CASE("reruns and thread counts leave every metric byte untouched") {
    Fixture fx;
    auto run_into = [&](const fs::path& out, int threads) {
        PipelineConfig cfg = fx.cfg;
        cfg.out_dir = out;
        cfg.threads = threads;
        auto model = run_train(cfg);
        run_evaluate(cfg, model);
        return out;
    };
    fs::path a = run_into(fx.dir.path() / "a", 1);
    fs::path b = run_into(fx.dir.path() / "b", 1);
    fs::path c = run_into(fx.dir.path() / "c", 4);

    std::vector<std::string> files = {"model.json", "validation_metrics.json",
                                      "summary.json", "permutation_importance.csv",
                                      "fraud_rate_by_timestep.csv",
                                      "feature_label_correlation.csv"};
    for (const char* split : {"validation", "test"})
        for (const char* variant : {"raw", "sigmoid", "isotonic"})
            for (const char* kind : {"roc", "pr", "sweep", "reliability", "topk"})
                files.push_back(std::string(kind) + "_" + split + "_" + variant + ".csv");

    for (const auto& name : files) {
        INFO("artifact: ", name);
        auto bytes = support::slurp(a / name);
        CHECK(bytes == support::slurp(b / name));
        CHECK(bytes == support::slurp(c / name));
    }

    // model.json is byte-stable, so its pipeline block (calibrators, selected
    // thresholds) is too. Config echoes differ only in out_dir/threads, which
    // are not inputs to any number.
    CHECK(read_json(a / "model.json").at("config") ==
          read_json(c / "model.json").at("config"));
}

TEST_CASE("extract rerun is byte-identical and the cache round-trips") {
    Fixture fx;
    auto first = run_extract(fx.cfg, "causal");
    auto first_bytes = support::slurp(*first.causal_csv);

    PipelineConfig again = fx.cfg;
    again.out_dir = fx.dir.path() / "out2";
    auto second = run_extract(again, "causal");
    CHECK(first_bytes == support::slurp(*second.causal_csv));

    // Training against the written cache gives the same model as recomputing
    // descriptors from scratch: the CSV stores full round-trip precision.
    PipelineConfig cached = fx.cfg;
    cached.out_dir = fx.dir.path() / "cached";
    cached.graph_features_csv = *first.causal_csv;
    auto cached_model = run_train(cached);

    PipelineConfig fresh = fx.cfg;
    fresh.out_dir = fx.dir.path() / "fresh";
    auto fresh_model = run_train(fresh);
    CHECK(support::slurp(cached_model) == support::slurp(fresh_model));

    // The cache is validated, not trusted: swapping two rows breaks the
    // (id, timestep) alignment with the graph and must be rejected.
    auto tampered = read_feature_csv(*first.causal_csv);
    std::swap(tampered.row_ids[0], tampered.row_ids[1]);
    fs::path bad = fx.dir.path() / "tampered.csv";
    write_feature_csv(tampered, bad);
    PipelineConfig poisoned = fx.cfg;
    poisoned.out_dir = fx.dir.path() / "poisoned";
    poisoned.graph_features_csv = bad;
    CHECK_THROWS_AS(run_train(poisoned), DataError);
}

TEST_CASE("graph-only training uses exactly the descriptor schema") {
    Fixture fx;
    fx.cfg.feature_config = FeatureConfig::G;
    auto model_path = run_train(fx.cfg);
    auto mj = read_json(model_path);
    auto schema = mj.at("schema").at("columns").get<std::vector<std::string>>();
    CHECK(schema == DescriptorSpec::all().names);
    CHECK(mj["pipeline"].at("feature_config") == "G");
}

TEST_CASE("calibration method none keeps the raw variant only") {
    Fixture fx;
    fx.cfg.calibration = CalibrationMethod::none;
    auto model_path = run_train(fx.cfg);
    auto mj = read_json(model_path);
    CHECK(mj["pipeline"].at("calibrators").empty());

    run_evaluate(fx.cfg, model_path);
    auto summary = read_json(fx.cfg.out_dir / "summary.json");
    const auto& variants = summary.at("splits").at("test").at("variants");
    CHECK(variants.size() == 1);
    CHECK(variants.contains("raw"));
    CHECK(fs::exists(fx.cfg.out_dir / "roc_test_raw.csv"));
    CHECK_FALSE(fs::exists(fx.cfg.out_dir / "roc_test_sigmoid.csv"));
}

TEST_CASE("perfectly separable data scores a perfect test summary") {
    support::TempDir dir;
    // One dominant attribute with disjoint class ranges; every label known.
    Rng rng(505);
    std::ofstream f(dir.path() / "features.csv"), e(dir.path() / "edges.csv"),
        c(dir.path() / "classes.csv");
    f << "node_id,time_step,amt\n";
    e << "src_id,dst_id\n";
    c << "node_id,class\n";
    std::int64_t id = 100;
    for (int t = 1; t <= 6; ++t) {
        for (int i = 0; i < 20; ++i, ++id) {
            bool illicit = i % 2 == 0;
            f << id << ',' << t << ',' << (illicit ? 100.0 + rng.normal() : rng.normal())
              << '\n';
            c << id << ',' << (illicit ? 1 : 2) << '\n';
            if (i > 0) e << id - 1 << ',' << id << '\n';
        }
    }
    f.close();
    e.close();
    c.close();

    PipelineConfig cfg;
    cfg.features_csv = dir.path() / "features.csv";
    cfg.edges_csv = dir.path() / "edges.csv";
    cfg.classes_csv = dir.path() / "classes.csv";
    cfg.out_dir = dir.path() / "out";
    cfg.split.train_end = 2;
    cfg.split.val_start = 3;
    cfg.split.val_end = 4;
    cfg.split.test_start = 5;
    cfg.feature_config = FeatureConfig::T;
    cfg.calibration = CalibrationMethod::none;
    cfg.train.n_trees = 50;
    cfg.topk = {5, 10};

    auto model_path = run_train(cfg);
    run_evaluate(cfg, model_path);
    auto summary = read_json(cfg.out_dir / "summary.json");
    const auto& raw = summary.at("splits").at("test").at("variants").at("raw");
    CHECK(raw.at("roc_auc").get<double>() == 1.0);
    CHECK(raw.at("average_precision").get<double>() == 1.0);
    CHECK(raw.at("brier").get<double>() == 0.0);
}

TEST_CASE("single-timestep audit finds zero leakage everywhere") {
    support::TempDir dir;
    auto data = support::write_synthetic_dataset(dir.path(), 77, 25, 1);
    PipelineConfig cfg;
    cfg.features_csv = data.features;
    cfg.edges_csv = data.edges;
    cfg.classes_csv = data.classes;
    cfg.out_dir = dir.path() / "out";

    auto extracted = run_extract(cfg, "both");
    auto audit = run_audit(cfg, *extracted.causal_csv, *extracted.full_csv, 1e-9);
    std::ifstream in(audit.columns_csv);
    std::string line;
    std::getline(in, line);  // header
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        auto first_comma = line.find(',');
        auto second_comma = line.find(',', first_comma + 1);
        CHECK(line.substr(first_comma + 1, second_comma - first_comma - 1) == "0");
    }
    CHECK(rows == 16);  // one per descriptor column
}

TEST_CASE("config validation and JSON round trip") {
    Fixture fx;
    auto j = fx.cfg.to_json();
    auto restored = PipelineConfig::from_json(j);
    CHECK(restored.to_json() == j);

    // from_file round trip.
    fs::path cfg_path = fx.dir.path() / "cfg.json";
    std::ofstream(cfg_path) << j.dump(2) << '\n';
    CHECK(PipelineConfig::from_file(cfg_path).to_json() == j);

    auto expect_rejected = [&](auto&& mutate) {
        nlohmann::json bad = j;
        mutate(bad);
        CHECK_THROWS_AS(PipelineConfig::from_json(bad), ContractError);
    };
    expect_rejected([](nlohmann::json& b) { b["bogus"] = 1; });
    expect_rejected([](nlohmann::json& b) { b["split"]["extra"] = 1; });
    expect_rejected([](nlohmann::json& b) { b["metrics"]["typo_bins"] = 4; });
    expect_rejected([](nlohmann::json& b) { b["importance"]["what"] = 0; });

    auto expect_invalid = [&](auto&& mutate) {
        PipelineConfig bad = fx.cfg;
        mutate(bad);
        CHECK_THROWS_AS(bad.validate(), ContractError);
    };
    expect_invalid([](PipelineConfig& b) { b.reliability_bins = 1; });
    expect_invalid([](PipelineConfig& b) { b.topk = {10, 10}; });
    expect_invalid([](PipelineConfig& b) { b.topk = {0, 5}; });
    expect_invalid([](PipelineConfig& b) { b.threshold_grid_step = 0.03; });
    expect_invalid([](PipelineConfig& b) { b.threshold_grid_step = 0.0; });
    expect_invalid([](PipelineConfig& b) {
        b.threshold_objectives = {"max_f1", "max_f1"};
    });
    expect_invalid([](PipelineConfig& b) { b.threshold_objectives = {"nonsense"}; });
    expect_invalid([](PipelineConfig& b) { b.importance_repeats = 0; });
    expect_invalid([](PipelineConfig& b) { b.split.val_start = 1; });

    // The threshold grid reproduces the documented default form exactly.
    CHECK(fx.cfg.threshold_grid() == default_threshold_grid());
    PipelineConfig coarse = fx.cfg;
    coarse.threshold_grid_step = 0.05;
    auto grid = coarse.threshold_grid();
    REQUIRE(grid.size() == 21);
    CHECK(grid[1] == 1.0 / 20.0);
    CHECK(grid.back() == 1.0);
}

TEST_CASE("evaluate refuses a bare forest file without pipeline metadata") {
    Fixture fx;
    auto data = support::make_separable(40, 1, 3);
    TrainConfig tc;
    tc.n_trees = 3;
    auto bare = ForestModel::fit(data.matrix, data.labels, tc);
    fs::path bare_path = fx.dir.path() / "bare_model.json";
    std::ofstream(bare_path) << bare.to_json().dump(2) << '\n';
    CHECK_THROWS_WITH_AS(run_evaluate(fx.cfg, bare_path), doctest::Contains("pipeline"),
                         DataError);
}

TEST_CASE("command line interface speaks the documented exit-code protocol") {
    Fixture fx;
    fs::path logs = fx.dir.path() / "logs";
    fs::create_directories(logs);

    CHECK(run_cli("--version", logs / "version.txt") == 0);
    CHECK(support::slurp(logs / "version.txt").rfind(kVersionString, 0) == 0);
    CHECK(run_cli("--help", logs / "help.txt") == 0);
    CHECK(run_cli("bogus-subcommand", logs / "bogus.txt") == 2);
    CHECK(run_cli("extract", logs / "noargs.txt") == 2);

    // Missing input file is a data error: exit 1.
    CHECK(run_cli("extract --features /nonexistent.csv --edges " +
                      fx.cfg.edges_csv.string() + " --classes " +
                      fx.cfg.classes_csv.string() + " --out " +
                      (fx.dir.path() / "x").string(),
                  logs / "missing.txt") == 1);

    // Unknown config key: exit 2.
    fs::path bad_cfg = fx.dir.path() / "bad_cfg.json";
    auto j = fx.cfg.to_json();
    j["mystery"] = true;
    std::ofstream(bad_cfg) << j.dump(2) << '\n';
    CHECK(run_cli("train --config " + bad_cfg.string(), logs / "badcfg.txt") == 2);

    // The full documented flow, driven purely through the CLI.
    fs::path cfg_path = fx.dir.path() / "cfg.json";
    std::ofstream(cfg_path) << fx.cfg.to_json().dump(2) << '\n';
    CHECK(run_cli("extract --config " + cfg_path.string() + " --mode both",
                  logs / "extract.txt") == 0);

    // Bad flag value on real inputs is a contract error: exit 2. (With
    // missing inputs the file read fails first, which is exit 1 instead.)
    CHECK(run_cli("audit --causal " +
                      (fx.cfg.out_dir / "graph_features_causal.csv").string() + " --full " +
                      (fx.cfg.out_dir / "graph_features_full.csv").string() +
                      " --tol -1 --out " + fx.cfg.out_dir.string(),
                  logs / "badtol.txt") == 2);
    CHECK(run_cli("audit --causal missing_a.csv --full missing_b.csv --out " +
                      (fx.dir.path() / "x").string(),
                  logs / "missingaudit.txt") == 1);

    CHECK(run_cli("audit --causal " +
                      (fx.cfg.out_dir / "graph_features_causal.csv").string() + " --full " +
                      (fx.cfg.out_dir / "graph_features_full.csv").string() + " --out " +
                      fx.cfg.out_dir.string(),
                  logs / "audit.txt") == 0);
    CHECK(run_cli("train --config " + cfg_path.string(), logs / "train.txt") == 0);
    CHECK(run_cli("evaluate --config " + cfg_path.string() + " --model " +
                      (fx.cfg.out_dir / "model.json").string(),
                  logs / "evaluate.txt") == 0);
    CHECK(fs::exists(fx.cfg.out_dir / "summary.json"));
    CHECK(support::slurp(logs / "train.txt").find("wrote") != std::string::npos);
}
