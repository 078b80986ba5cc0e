#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraudkit/calibration.hpp"
#include "fraudkit/dataset.hpp"
#include "fraudkit/forest.hpp"
#include "fraudkit/graph_features.hpp"
#include "fraudkit/metrics.hpp"

namespace fraudkit {

inline constexpr const char* kVersionString = "fraudkit 0.1.0";

enum class CalibrationMethod { none, sigmoid, isotonic, both };

const char* calibration_method_name(CalibrationMethod m);
CalibrationMethod parse_calibration_method(const std::string& text);

// Everything a run needs, serializable to/from the JSON config file and
// echoed into every run manifest so outputs are self-describing.
struct PipelineConfig {
    std::filesystem::path features_csv;
    std::filesystem::path edges_csv;
    std::filesystem::path classes_csv;
    bool raw_elliptic = false;
    std::filesystem::path graph_features_csv;  // optional causal-matrix cache
    std::filesystem::path out_dir;

    std::uint64_t seed = 1;
    int threads = 1;  // <=0: all hardware threads

    SplitSpec split;
    DescriptorSpec descriptors = DescriptorSpec::all();
    TrainConfig train;
    FeatureConfig feature_config = FeatureConfig::TG;
    CalibrationMethod calibration = CalibrationMethod::both;

    // Metric options.
    std::size_t reliability_bins = 10;
    std::vector<std::size_t> topk = {50, 100, 200, 400};
    double threshold_grid_step = 0.01;
    std::vector<std::string> threshold_objectives = {"max_f1", "min_recall=0.9",
                                                     "min_precision=0.9"};

    // Permutation importance options.
    int importance_repeats = 5;
    std::size_t importance_max_rows = 2000;
    ImportanceMetric importance_metric = ImportanceMetric::roc_auc;

    void validate() const;
    nlohmann::json to_json() const;
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig from_file(const std::filesystem::path& path);

    std::vector<double> threshold_grid() const;
};

struct ExtractResult {
    std::optional<std::filesystem::path> causal_csv;
    std::optional<std::filesystem::path> full_csv;
};

// `mode`: causal | full | both.
ExtractResult run_extract(const PipelineConfig& config, const std::string& mode);

struct AuditResult {
    std::filesystem::path columns_csv;
    std::filesystem::path timesteps_csv;
};

AuditResult run_audit(const PipelineConfig& config, const std::filesystem::path& causal_csv,
                      const std::filesystem::path& full_csv, double tol);

// Trains on the train split, fits calibrators and selects thresholds on the
// validation split, persists model.json (+ validation_metrics.json).
std::filesystem::path run_train(const PipelineConfig& config);

// Scores validation and test with the persisted model and emits every report
// artifact (summary JSON, curves, reliability, top-K, importances, rates,
// correlations) into config.out_dir.
void run_evaluate(const PipelineConfig& config, const std::filesystem::path& model_path);

}  // namespace fraudkit
