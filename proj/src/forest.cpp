#include "fraudkit/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fraudkit/csv.hpp"
#include "fraudkit/errors.hpp"
#include "fraudkit/metrics.hpp"
#include "fraudkit/parallel.hpp"
#include "fraudkit/rng.hpp"

namespace fraudkit {

void TrainConfig::validate() const {
    if (n_trees < 1) throw ContractError("train config: n_trees must be >= 1");
    if (max_depth < 0) throw ContractError("train config: max_depth must be >= 0");
    if (min_samples_leaf < 1)
        throw ContractError("train config: min_samples_leaf must be >= 1");
    if (features_per_split == FeaturesPerSplit::fraction &&
        !(feature_fraction > 0.0 && feature_fraction <= 1.0))
        throw ContractError("train config: feature_fraction must lie in (0,1]");
}

nlohmann::json TrainConfig::to_json() const {
    const char* fps = features_per_split == FeaturesPerSplit::sqrt       ? "sqrt"
                      : features_per_split == FeaturesPerSplit::fraction ? "fraction"
                                                                         : "all";
    return nlohmann::json{
        {"n_trees", n_trees},
        {"max_depth", max_depth},
        {"min_samples_leaf", min_samples_leaf},
        {"features_per_split", fps},
        {"feature_fraction", feature_fraction},
        {"class_weighting",
         class_weighting == ClassWeighting::balanced ? "balanced" : "none"},
        {"seed", seed},
        {"bootstrap", bootstrap},
    };
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    if (!j.is_object()) throw DataError("train config: expected a JSON object");
    cfg.n_trees = j.value("n_trees", cfg.n_trees);
    cfg.max_depth = j.value("max_depth", cfg.max_depth);
    cfg.min_samples_leaf = j.value("min_samples_leaf", cfg.min_samples_leaf);
    std::string fps = j.value("features_per_split", std::string("sqrt"));
    if (fps == "sqrt")
        cfg.features_per_split = FeaturesPerSplit::sqrt;
    else if (fps == "fraction")
        cfg.features_per_split = FeaturesPerSplit::fraction;
    else if (fps == "all")
        cfg.features_per_split = FeaturesPerSplit::all;
    else
        throw DataError("train config: unknown features_per_split \"" + fps + "\"");
    cfg.feature_fraction = j.value("feature_fraction", cfg.feature_fraction);
    std::string cw = j.value("class_weighting", std::string("balanced"));
    if (cw == "balanced")
        cfg.class_weighting = ClassWeighting::balanced;
    else if (cw == "none")
        cfg.class_weighting = ClassWeighting::none;
    else
        throw DataError("train config: unknown class_weighting \"" + cw + "\"");
    cfg.seed = j.value("seed", cfg.seed);
    cfg.bootstrap = j.value("bootstrap", cfg.bootstrap);
    cfg.validate();
    return cfg;
}

std::string ForestModel::schema_fingerprint(const std::vector<std::string>& columns) {
    std::string joined;
    for (const std::string& c : columns) {
        joined += c;
        joined += '\n';
    }
    return csvio::fnv1a64_bytes(joined);
}

namespace {

// Shared read-only training inputs in column-major layout.
struct TrainData {
    std::size_t n = 0, d = 0;
    std::vector<double> colmaj;  // d * n
    std::span<const int> labels;

    double value(std::size_t col, std::size_t sample) const {
        return colmaj[col * n + sample];
    }
};

struct BestSplit {
    double gini = std::numeric_limits<double>::infinity();
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::size_t left_count = 0;
};

double gini_of(double w0, double w1) {
    double w = w0 + w1;
    if (w <= 0.0) return 0.0;
    double p0 = w0 / w, p1 = w1 / w;
    return 1.0 - p0 * p0 - p1 * p1;
}

class TreeBuilder {
public:
    TreeBuilder(const TrainData& data, const TrainConfig& config, std::uint64_t tree_seed)
        : data_(data), config_(config), rng_(tree_seed) {}

    DecisionTree build() {
        const std::size_t n = data_.n;
        samples_.resize(n);
        if (config_.bootstrap) {
            for (std::size_t i = 0; i < n; ++i)
                samples_[i] = static_cast<std::uint32_t>(rng_.uniform_index(n));
        } else {
            for (std::size_t i = 0; i < n; ++i) samples_[i] = static_cast<std::uint32_t>(i);
        }

        // Balanced weights from the bootstrap sample's own class counts, so
        // each tree is internally balanced: w_c = n / (2 * n_c).
        std::size_t nb1 = 0;
        for (std::uint32_t s : samples_) nb1 += static_cast<std::size_t>(data_.labels[s]);
        std::size_t nb0 = n - nb1;
        if (config_.class_weighting == TrainConfig::ClassWeighting::balanced) {
            w0_ = nb0 == 0 ? 0.0 : static_cast<double>(n) / (2.0 * static_cast<double>(nb0));
            w1_ = nb1 == 0 ? 0.0 : static_cast<double>(n) / (2.0 * static_cast<double>(nb1));
        } else {
            w0_ = w1_ = 1.0;
        }

        k_candidates_ = candidate_count();
        feature_pool_.resize(data_.d);

        DecisionTree tree;
        if (nb0 == 0 || nb1 == 0) {
            // Degenerate bootstrap sample: a single pure leaf.
            TreeNode leaf;
            leaf.p_illicit = nb1 > 0 ? 1.0 : 0.0;
            tree.nodes.push_back(leaf);
            return tree;
        }

        struct Task {
            std::int32_t slot;
            std::uint32_t begin, end, depth;
        };
        std::vector<Task> stack;
        tree.nodes.emplace_back();
        stack.push_back({0, 0, static_cast<std::uint32_t>(n), 0});

        while (!stack.empty()) {
            Task task = stack.back();
            stack.pop_back();
            expand(tree, task.slot, task.begin, task.end, task.depth, stack);
        }
        return tree;
    }

private:
    template <typename Stack>
    void expand(DecisionTree& tree, std::int32_t slot, std::uint32_t begin,
                std::uint32_t end, std::uint32_t depth, Stack& stack) {
        const std::size_t size = end - begin;
        std::size_t n1 = 0;
        for (std::uint32_t i = begin; i < end; ++i)
            n1 += static_cast<std::size_t>(data_.labels[samples_[i]]);
        const std::size_t n0 = size - n1;
        const double leaf_p = w1_ * static_cast<double>(n1) /
                              (w0_ * static_cast<double>(n0) + w1_ * static_cast<double>(n1));

        const bool depth_capped =
            config_.max_depth > 0 && depth >= static_cast<std::uint32_t>(config_.max_depth);
        const auto msl = static_cast<std::size_t>(config_.min_samples_leaf);
        if (n0 == 0 || n1 == 0 || size < 2 * msl || depth_capped) {
            make_leaf(tree, slot, leaf_p);
            return;
        }

        BestSplit best = scan_candidates(begin, end, n0, n1, msl);
        if (best.feature < 0) {
            make_leaf(tree, slot, leaf_p);
            return;
        }

        auto mid_it = std::partition(
            samples_.begin() + begin, samples_.begin() + end, [&](std::uint32_t s) {
                return data_.value(static_cast<std::size_t>(best.feature), s) <=
                       best.threshold;
            });
        auto mid = static_cast<std::uint32_t>(mid_it - samples_.begin());

        auto left = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        auto right = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[slot].feature = best.feature;
        tree.nodes[slot].threshold = best.threshold;
        tree.nodes[slot].left = left;
        tree.nodes[slot].right = right;

        // Push right first so the left child is expanded next (fixed DFS
        // numbering independent of data).
        stack.push_back({right, mid, end, depth + 1});
        stack.push_back({left, begin, mid, depth + 1});
    }

    static void make_leaf(DecisionTree& tree, std::int32_t slot, double p) {
        tree.nodes[slot].feature = -1;
        tree.nodes[slot].p_illicit = p;
    }

    std::size_t candidate_count() const {
        const auto d = static_cast<double>(data_.d);
        switch (config_.features_per_split) {
            case TrainConfig::FeaturesPerSplit::sqrt:
                return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(d)));
            case TrainConfig::FeaturesPerSplit::fraction:
                return std::clamp<std::size_t>(
                    static_cast<std::size_t>(std::llround(config_.feature_fraction * d)), 1,
                    data_.d);
            case TrainConfig::FeaturesPerSplit::all:
                return data_.d;
        }
        return data_.d;
    }

    BestSplit scan_candidates(std::uint32_t begin, std::uint32_t end, std::size_t n0,
                              std::size_t n1, std::size_t msl) {
        // Draw k distinct candidate features, then visit them in ascending
        // column order so Gini ties resolve to the lowest column.
        for (std::size_t i = 0; i < data_.d; ++i)
            feature_pool_[i] = static_cast<std::uint32_t>(i);
        for (std::size_t i = 0; i < k_candidates_; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng_.uniform_index(data_.d - i));
            std::swap(feature_pool_[i], feature_pool_[j]);
        }
        std::sort(feature_pool_.begin(), feature_pool_.begin() +
                                             static_cast<std::ptrdiff_t>(k_candidates_));

        const double total_w0 = w0_ * static_cast<double>(n0);
        const double total_w1 = w1_ * static_cast<double>(n1);
        const double total_w = total_w0 + total_w1;

        BestSplit best;
        for (std::size_t ci = 0; ci < k_candidates_; ++ci) {
            const std::uint32_t f = feature_pool_[ci];
            vals_.clear();
            for (std::uint32_t i = begin; i < end; ++i) {
                std::uint32_t s = samples_[i];
                vals_.push_back({data_.value(f, s), static_cast<std::uint8_t>(data_.labels[s])});
            }
            std::sort(vals_.begin(), vals_.end(),
                      [](const ValLab& a, const ValLab& b) { return a.value < b.value; });

            double left_w0 = 0.0, left_w1 = 0.0;
            std::size_t left_n = 0;
            const std::size_t m = vals_.size();
            std::size_t i = 0;
            while (i < m) {
                // Absorb the tie group starting at i.
                std::size_t j = i;
                std::size_t g1 = 0;
                const double v = vals_[i].value;
                while (j < m && vals_[j].value == v) {
                    g1 += vals_[j].label;
                    ++j;
                }
                left_w1 += w1_ * static_cast<double>(g1);
                left_w0 += w0_ * static_cast<double>(j - i - g1);
                left_n += j - i;
                i = j;
                if (i >= m) break;  // no distinct value after this group

                if (left_n < msl || m - left_n < msl) continue;

                // Midpoint between adjacent distinct values; if rounding
                // collapses it onto the upper value, fall back to the lower
                // so `x <= thr` still separates the groups as scanned.
                double thr = (v + vals_[i].value) * 0.5;
                if (thr >= vals_[i].value) thr = v;

                double right_w0 = total_w0 - left_w0;
                double right_w1 = total_w1 - left_w1;
                double lw = left_w0 + left_w1, rw = right_w0 + right_w1;
                double gini =
                    (lw * gini_of(left_w0, left_w1) + rw * gini_of(right_w0, right_w1)) /
                    total_w;
                if (gini < best.gini) {
                    best.gini = gini;
                    best.feature = static_cast<std::int32_t>(f);
                    best.threshold = thr;
                    best.left_count = left_n;
                }
            }
        }
        return best;
    }

    struct ValLab {
        double value;
        std::uint8_t label;
    };

    const TrainData& data_;
    const TrainConfig& config_;
    Rng rng_;
    double w0_ = 1.0, w1_ = 1.0;
    std::size_t k_candidates_ = 1;
    std::vector<std::uint32_t> samples_;
    std::vector<std::uint32_t> feature_pool_;
    std::vector<ValLab> vals_;
};

}  // namespace

ForestModel ForestModel::fit(const FeatureMatrix& train, std::span<const int> labels,
                             const TrainConfig& config) {
    config.validate();
    train.check_consistent();
    if (train.rows() == 0 || train.cols() == 0)
        throw DataError("forest fit: empty training matrix");
    if (labels.size() != train.rows())
        throw ContractError("forest fit: label count != row count");
    train.require_finite();

    std::size_t pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw DataError("forest fit: labels must be 0 or 1");
        pos += static_cast<std::size_t>(y);
    }
    if (pos == 0 || pos == labels.size())
        throw DataError("forest fit: training labels contain a single class");

    TrainData data;
    data.n = train.rows();
    data.d = train.cols();
    data.labels = labels;
    data.colmaj.resize(data.n * data.d);
    for (std::size_t r = 0; r < data.n; ++r)
        for (std::size_t c = 0; c < data.d; ++c) data.colmaj[c * data.n + r] = train.at(r, c);

    ForestModel model;
    model.config_ = config;
    model.schema_ = train.columns;
    model.fingerprint_ = schema_fingerprint(train.columns);
    model.trees_.resize(static_cast<std::size_t>(config.n_trees));

    parallel_for(model.trees_.size(), config.threads, [&](std::size_t t) {
        TreeBuilder builder(data, config, derive_seed(config.seed, t));
        model.trees_[t] = builder.build();
    });
    return model;
}

std::vector<double> ForestModel::predict_proba(const FeatureMatrix& rows) const {
    if (trees_.empty()) throw ContractError("predict_proba on an unfitted model");
    rows.check_consistent();

    // Schema is matched by name; identical layout takes the no-copy path.
    std::vector<std::size_t> source_col;
    const bool direct = rows.columns == schema_;
    if (!direct) {
        source_col.reserve(schema_.size());
        std::string missing;
        for (const std::string& name : schema_) {
            auto idx = rows.column_index(name);
            if (!idx) {
                missing += missing.empty() ? "" : ", ";
                missing += name;
                continue;
            }
            source_col.push_back(*idx);
        }
        if (!missing.empty())
            throw ContractError("predict_proba: input is missing model columns: " + missing);
    }

    const double inv_trees = 1.0 / static_cast<double>(trees_.size());
    std::vector<double> out(rows.rows());
    std::vector<double> buffer(schema_.size());
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        const double* row_ptr;
        if (direct) {
            row_ptr = rows.values.data() + r * rows.cols();
        } else {
            for (std::size_t c = 0; c < schema_.size(); ++c)
                buffer[c] = rows.at(r, source_col[c]);
            row_ptr = buffer.data();
        }
        double acc = 0.0;
        for (const DecisionTree& tree : trees_) acc += tree.predict_row(row_ptr);
        out[r] = acc * inv_trees;
    }
    return out;
}

nlohmann::json ForestModel::to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const DecisionTree& tree : trees_) {
        nlohmann::json t;
        auto& feature = t["feature"] = nlohmann::json::array();
        auto& threshold = t["threshold"] = nlohmann::json::array();
        auto& left = t["left"] = nlohmann::json::array();
        auto& right = t["right"] = nlohmann::json::array();
        auto& p = t["p"] = nlohmann::json::array();
        for (const TreeNode& node : tree.nodes) {
            feature.push_back(node.feature);
            threshold.push_back(node.threshold);
            left.push_back(node.left);
            right.push_back(node.right);
            p.push_back(node.p_illicit);
        }
        trees.push_back(std::move(t));
    }
    return nlohmann::json{
        {"format", "fraudkit-forest"},
        {"version", 1},
        {"config", config_.to_json()},
        {"schema", {{"columns", schema_}, {"fingerprint", fingerprint_}}},
        {"trees", std::move(trees)},
    };
}

ForestModel ForestModel::from_json(const nlohmann::json& j) {
    if (!j.is_object() || j.value("format", std::string()) != "fraudkit-forest")
        throw DataError("model file: not a fraudkit-forest document");
    if (j.value("version", 0) != 1)
        throw DataError("model file: unsupported version");

    ForestModel model;
    model.config_ = TrainConfig::from_json(j.at("config"));
    const nlohmann::json& schema = j.at("schema");
    model.schema_ = schema.at("columns").get<std::vector<std::string>>();
    model.fingerprint_ = schema.value("fingerprint", std::string());
    if (model.fingerprint_ != schema_fingerprint(model.schema_))
        throw DataError("model file: schema fingerprint does not match column list");

    for (const nlohmann::json& t : j.at("trees")) {
        DecisionTree tree;
        const auto& feature = t.at("feature");
        const auto& threshold = t.at("threshold");
        const auto& left = t.at("left");
        const auto& right = t.at("right");
        const auto& p = t.at("p");
        const std::size_t count = feature.size();
        if (threshold.size() != count || left.size() != count || right.size() != count ||
            p.size() != count || count == 0)
            throw DataError("model file: inconsistent tree arrays");
        tree.nodes.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            TreeNode& node = tree.nodes[i];
            node.feature = feature[i].get<std::int32_t>();
            node.threshold = threshold[i].get<double>();
            node.left = left[i].get<std::int32_t>();
            node.right = right[i].get<std::int32_t>();
            node.p_illicit = p[i].get<double>();
            if (node.feature >= static_cast<std::int32_t>(model.schema_.size()))
                throw DataError("model file: split column out of schema range");
            if (node.feature >= 0) {
                if (node.left < 0 || node.right < 0 ||
                    node.left >= static_cast<std::int32_t>(count) ||
                    node.right >= static_cast<std::int32_t>(count))
                    throw DataError("model file: child index out of range");
            } else if (!(node.p_illicit >= 0.0 && node.p_illicit <= 1.0)) {
                throw DataError("model file: leaf probability outside [0,1]");
            }
        }
        model.trees_.push_back(std::move(tree));
    }
    if (model.trees_.empty()) throw DataError("model file: no trees");
    return model;
}

std::vector<ImportanceEntry> permutation_importance(const ForestModel& model,
                                                    const FeatureMatrix& rows,
                                                    std::span<const int> labels,
                                                    ImportanceMetric metric, int repeats,
                                                    std::uint64_t seed) {
    if (repeats < 1) throw ContractError("permutation_importance: repeats must be >= 1");
    if (labels.size() != rows.rows())
        throw ContractError("permutation_importance: label count != row count");
    if (rows.rows() == 0) throw DataError("permutation_importance: empty input");

    auto score_metric = [&](std::span<const double> scores) {
        return metric == ImportanceMetric::roc_auc ? roc_auc(scores, labels)
                                                   : average_precision(scores, labels);
    };

    // Work on a schema-ordered copy so column index == schema index.
    FeatureMatrix aligned;
    aligned.row_ids = rows.row_ids;
    aligned.row_times = rows.row_times;
    aligned.provenance = rows.provenance;
    aligned.columns = model.schema();
    aligned.values.resize(rows.rows() * model.schema().size());
    {
        std::vector<std::size_t> src(model.schema().size());
        for (std::size_t c = 0; c < model.schema().size(); ++c) {
            auto idx = rows.column_index(model.schema()[c]);
            if (!idx)
                throw ContractError("permutation_importance: input missing column \"" +
                                    model.schema()[c] + "\"");
            src[c] = *idx;
        }
        for (std::size_t r = 0; r < rows.rows(); ++r)
            for (std::size_t c = 0; c < src.size(); ++c)
                aligned.at(r, c) = rows.at(r, src[c]);
    }

    const double base = score_metric(model.predict_proba(aligned));
    const std::size_t n = aligned.rows();

    std::vector<ImportanceEntry> out;
    out.reserve(aligned.cols());
    std::vector<double> original(n), shuffled(n), drops;
    for (std::size_t c = 0; c < aligned.cols(); ++c) {
        for (std::size_t r = 0; r < n; ++r) original[r] = aligned.at(r, c);
        drops.clear();
        for (int rep = 0; rep < repeats; ++rep) {
            Rng rng(derive_seed(derive_seed(seed, c), static_cast<std::uint64_t>(rep)));
            shuffled = original;
            rng.shuffle(std::span<double>(shuffled));
            for (std::size_t r = 0; r < n; ++r) aligned.at(r, c) = shuffled[r];
            drops.push_back(base - score_metric(model.predict_proba(aligned)));
        }
        for (std::size_t r = 0; r < n; ++r) aligned.at(r, c) = original[r];

        ImportanceEntry entry;
        entry.column = aligned.columns[c];
        double mean = 0.0;
        for (double d : drops) mean += d;
        mean /= static_cast<double>(drops.size());
        double var = 0.0;
        for (double d : drops) var += (d - mean) * (d - mean);
        var /= static_cast<double>(drops.size());
        entry.mean_drop = mean;
        entry.std_dev = std::sqrt(var);
        out.push_back(std::move(entry));
    }
    return out;
}

}  // namespace fraudkit
