// fraudkit command-line interface: extract / audit / train / evaluate.
//
// Exit codes: 0 success, 1 data error (bad inputs), 2 contract error (bad
// configuration or usage).

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fraudkit/errors.hpp"
#include "fraudkit/pipeline.hpp"

namespace {

using fraudkit::PipelineConfig;

PipelineConfig base_config(const std::string& config_path) {
    if (config_path.empty()) return PipelineConfig{};
    return PipelineConfig::from_file(config_path);
}

// Shared holders for options that exist on several subcommands; values are
// only applied when the flag was actually given, so config-file settings
// survive unless explicitly overridden.
struct CommonOpts {
    std::string config_path;
    std::string features_csv, edges_csv, classes_csv, graph_features_csv, out_dir;
    bool raw_elliptic = false;
    std::uint64_t seed = 1;
    int threads = 1;

    CLI::Option* o_features = nullptr;
    CLI::Option* o_edges = nullptr;
    CLI::Option* o_classes = nullptr;
    CLI::Option* o_graph_features = nullptr;
    CLI::Option* o_out = nullptr;
    CLI::Option* o_raw = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_threads = nullptr;

    // `features_flag_name` differs because `train` reserves --features for
    // the T/G/TG selector.
    void attach(CLI::App* cmd, const std::string& features_flag_name) {
        cmd->add_option("--config", config_path, "JSON config file (flags override it)");
        o_features =
            cmd->add_option(features_flag_name, features_csv, "node features CSV path");
        o_edges = cmd->add_option("--edges", edges_csv, "edge list CSV path");
        o_classes = cmd->add_option("--classes", classes_csv, "node class CSV path");
        o_graph_features = cmd->add_option("--graph-features", graph_features_csv,
                                           "causal graph-descriptor matrix cache path");
        o_out = cmd->add_option("--out", out_dir, "output directory");
        o_raw = cmd->add_flag("--raw-elliptic", raw_elliptic,
                              "features file is the header-less raw Elliptic layout");
        o_seed = cmd->add_option("--seed", seed, "run seed (also seeds training)");
        o_threads =
            cmd->add_option("--threads", threads, "worker threads (<=0: all hardware)");
    }

    PipelineConfig make() const {
        PipelineConfig cfg = base_config(config_path);
        if (*o_features) cfg.features_csv = features_csv;
        if (*o_edges) cfg.edges_csv = edges_csv;
        if (*o_classes) cfg.classes_csv = classes_csv;
        if (*o_graph_features) cfg.graph_features_csv = graph_features_csv;
        if (*o_out) cfg.out_dir = out_dir;
        if (*o_raw) cfg.raw_elliptic = raw_elliptic;
        if (*o_seed) {
            cfg.seed = seed;
            cfg.train.seed = seed;
        }
        if (*o_threads) cfg.threads = threads;
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"leakage-safe temporal graph features and fraud classification"};
    app.set_version_flag("--version", std::string(fraudkit::kVersionString));
    app.require_subcommand(1);

    // ---- extract ----
    auto* extract = app.add_subcommand("extract", "compute graph descriptor matrices");
    CommonOpts ex;
    ex.attach(extract, "--features");
    std::string mode = "causal";
    extract->add_option("--mode", mode, "which matrices to write")
        ->check(CLI::IsMember({"causal", "full", "both"}))
        ->capture_default_str();

    // ---- audit ----
    auto* audit = app.add_subcommand("audit", "compare causal vs full matrices for leakage");
    std::string audit_config, causal_path, full_path, audit_out;
    double tol = 1e-9;
    audit->add_option("--config", audit_config, "JSON config file (flags override it)");
    audit->add_option("--causal", causal_path, "causal feature matrix CSV")->required();
    audit->add_option("--full", full_path, "full-graph feature matrix CSV")->required();
    audit->add_option("--tol", tol, "difference tolerance")->capture_default_str();
    auto* audit_out_opt = audit->add_option("--out", audit_out, "output directory");

    // ---- train ----
    auto* train = app.add_subcommand("train", "fit the forest and calibrators");
    CommonOpts tr;
    tr.attach(train, "--features-csv");
    std::string feature_config, calibration;
    int trees = 0, max_depth = 0, min_samples_leaf = 0;
    auto* t_fc = train->add_option("--features", feature_config,
                                   "feature configuration: T, G or TG");
    auto* t_cal = train->add_option("--calibration", calibration,
                                    "none, sigmoid, isotonic or both");
    auto* t_trees = train->add_option("--trees", trees, "number of trees");
    auto* t_depth = train->add_option("--max-depth", max_depth, "tree depth cap (0: none)");
    auto* t_msl =
        train->add_option("--min-samples-leaf", min_samples_leaf, "minimum leaf size");

    // ---- evaluate ----
    auto* evaluate = app.add_subcommand("evaluate", "score splits and emit reports");
    CommonOpts ev;
    ev.attach(evaluate, "--features-csv");
    std::string model_path;
    evaluate->add_option("--model", model_path, "model file from train")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage problems are contract errors
    }

    try {
        if (extract->parsed()) {
            auto result = fraudkit::run_extract(ex.make(), mode);
            if (result.causal_csv) std::cout << "wrote " << result.causal_csv->string() << '\n';
            if (result.full_csv) std::cout << "wrote " << result.full_csv->string() << '\n';
        } else if (audit->parsed()) {
            PipelineConfig cfg = base_config(audit_config);
            if (*audit_out_opt) cfg.out_dir = audit_out;
            auto result = fraudkit::run_audit(cfg, causal_path, full_path, tol);
            std::cout << "wrote " << result.columns_csv.string() << '\n'
                      << "wrote " << result.timesteps_csv.string() << '\n';
        } else if (train->parsed()) {
            PipelineConfig cfg = tr.make();
            if (*t_fc) cfg.feature_config = fraudkit::parse_feature_config(feature_config);
            if (*t_cal) cfg.calibration = fraudkit::parse_calibration_method(calibration);
            if (*t_trees) cfg.train.n_trees = trees;
            if (*t_depth) cfg.train.max_depth = max_depth;
            if (*t_msl) cfg.train.min_samples_leaf = min_samples_leaf;
            auto path = fraudkit::run_train(cfg);
            std::cout << "wrote " << path.string() << '\n';
        } else if (evaluate->parsed()) {
            PipelineConfig cfg = ev.make();
            fraudkit::run_evaluate(cfg, model_path);
            std::cout << "wrote " << (cfg.out_dir / "summary.json").string() << '\n';
        }
        return 0;
    } catch (const fraudkit::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const fraudkit::ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
}
