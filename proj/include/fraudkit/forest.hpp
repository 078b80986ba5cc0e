#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraudkit/feature_matrix.hpp"

namespace fraudkit {

struct TrainConfig {
    enum class FeaturesPerSplit { sqrt, fraction, all };
    enum class ClassWeighting { balanced, none };

    int n_trees = 400;
    int max_depth = 0;  // 0 = unlimited
    int min_samples_leaf = 1;
    FeaturesPerSplit features_per_split = FeaturesPerSplit::sqrt;
    double feature_fraction = 1.0;  // only read for FeaturesPerSplit::fraction
    ClassWeighting class_weighting = ClassWeighting::balanced;
    std::uint64_t seed = 1;
    bool bootstrap = true;  // test hook: disable for memorization checks
    int threads = 1;        // <=0 means all hardware threads

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// Binary CART node; feature == -1 marks a leaf carrying the weighted illicit
// class frequency of its training samples.
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double p_illicit = 0.0;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    // `row` must be laid out in the model's schema order.
    double predict_row(const double* row) const {
        std::int32_t at = 0;
        while (nodes[at].feature >= 0)
            at = row[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left
                                                               : nodes[at].right;
        return nodes[at].p_illicit;
    }
};

// Bagged forest of class-weighted CART trees. Deterministic: tree t's RNG
// stream is derived from (seed, t), trees merge in index order, and split
// ties resolve to the lowest column then lowest threshold, so the fitted
// model is identical for any thread count.
class ForestModel {
public:
    static ForestModel fit(const FeatureMatrix& train, std::span<const int> labels,
                           const TrainConfig& config);

    // Mean per-tree leaf probability per row. Columns are matched to the
    // training schema by name: any column order with the right names works.
    std::vector<double> predict_proba(const FeatureMatrix& rows) const;

    const std::vector<std::string>& schema() const { return schema_; }
    const std::string& fingerprint() const { return fingerprint_; }
    const TrainConfig& config() const { return config_; }
    const std::vector<DecisionTree>& trees() const { return trees_; }

    nlohmann::json to_json() const;
    static ForestModel from_json(const nlohmann::json& j);

    static std::string schema_fingerprint(const std::vector<std::string>& columns);

private:
    TrainConfig config_;
    std::vector<std::string> schema_;
    std::string fingerprint_;
    std::vector<DecisionTree> trees_;
};

enum class ImportanceMetric { roc_auc, average_precision };

struct ImportanceEntry {
    std::string column;
    double mean_drop = 0.0;
    double std_dev = 0.0;
};

// Mean decrease of the metric when one column is shuffled, over `repeats`
// independent permutations; entries returned in model schema order.
std::vector<ImportanceEntry> permutation_importance(const ForestModel& model,
                                                    const FeatureMatrix& rows,
                                                    std::span<const int> labels,
                                                    ImportanceMetric metric, int repeats,
                                                    std::uint64_t seed);

}  // namespace fraudkit
