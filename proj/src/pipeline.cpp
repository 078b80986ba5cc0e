#include "fraudkit/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include "fraudkit/csv.hpp"
#include "fraudkit/errors.hpp"
#include "fraudkit/parallel.hpp"
#include "fraudkit/rng.hpp"

namespace fraudkit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream id for the deterministic importance-subsample shuffle, kept apart
// from the per-tree and per-permutation streams.
constexpr std::uint64_t kImportanceSubsampleStream = 0x696d706fULL;  // "impo"

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw DataError("failed while writing " + path.string());
}

void write_json_file(const json& j, const fs::path& path) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
    finish_output(out, path);
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": invalid JSON: " + e.what());
    }
    return j;
}

const char* importance_metric_name(ImportanceMetric m) {
    return m == ImportanceMetric::roc_auc ? "roc_auc" : "average_precision";
}

ImportanceMetric parse_importance_metric(const std::string& text) {
    if (text == "roc_auc") return ImportanceMetric::roc_auc;
    if (text == "average_precision") return ImportanceMetric::average_precision;
    throw ContractError("unknown importance metric \"" + text +
                        "\" (expected roc_auc or average_precision)");
}

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& item : j.items())
        if (!known.contains(item.key()))
            throw ContractError("unknown key \"" + item.key() + "\" in " + where);
}

// Track artifacts + inputs for the run manifest; digests are computed from
// the bytes actually on disk, after each artifact is finished.
struct ManifestBuilder {
    std::string command;
    json inputs = json::object();
    json artifacts = json::object();
    json timings = json::object();

    void input(const fs::path& path) { inputs[path.string()] = csvio::fnv1a64_file(path); }
    void artifact(const fs::path& path) {
        artifacts[path.filename().string()] = csvio::fnv1a64_file(path);
    }
    void timing(const std::string& name, double ms) { timings[name] = ms; }

    // The manifest is written last so its presence marks a completed run.
    void write(const PipelineConfig& config, const fs::path& path, json extra = {}) {
        json j;
        j["version"] = kVersionString;
        j["command"] = command;
        j["config"] = config.to_json();
        j["inputs"] = inputs;
        j["artifacts"] = artifacts;
        j["timings_ms"] = timings;
        if (!extra.is_null())
            for (auto& item : extra.items()) j[item.key()] = item.value();
        write_json_file(j, path);
    }
};

void write_curve_csv(const CurveData& curve, const fs::path& path) {
    auto out = open_output(path);
    switch (curve.kind) {
        case CurveKind::roc:
            out << "fpr,tpr,threshold\n";
            for (const auto& p : curve.points)
                out << csvio::format_double(p.x) << ',' << csvio::format_double(p.y) << ','
                    << csvio::format_double(p.threshold) << '\n';
            break;
        case CurveKind::pr:
            out << "recall,precision,threshold\n";
            for (const auto& p : curve.points)
                out << csvio::format_double(p.x) << ',' << csvio::format_double(p.y) << ','
                    << csvio::format_double(p.threshold) << '\n';
            break;
        case CurveKind::threshold_sweep:
            out << "threshold,precision,recall,f1\n";
            for (const auto& p : curve.points)
                out << csvio::format_double(p.x) << ',' << csvio::format_double(p.y) << ','
                    << csvio::format_double(p.extra) << ',' << csvio::format_double(p.extra2)
                    << '\n';
            break;
    }
    finish_output(out, path);
}

void write_reliability_csv(const ReliabilityTable& table, const fs::path& path) {
    auto out = open_output(path);
    out << "bin_lo,bin_hi,mean_pred,emp_freq,count\n";
    for (const auto& bin : table.bins) {
        out << csvio::format_double(bin.lower) << ',' << csvio::format_double(bin.upper) << ',';
        if (bin.count > 0)
            out << csvio::format_double(bin.mean_predicted) << ','
                << csvio::format_double(bin.empirical_frequency);
        else
            out << ',';  // empty bin: no defined mean/frequency
        out << ',' << bin.count << '\n';
    }
    finish_output(out, path);
}

void write_topk_csv(std::span<const double> scores, std::span<const int> labels,
                    std::span<const std::size_t> ks, const fs::path& path) {
    auto out = open_output(path);
    out << "k,precision\n";
    for (std::size_t k : ks) {
        if (k == 0 || k > scores.size()) continue;  // not computable on this split
        out << k << ',' << csvio::format_double(precision_at_k(scores, labels, k)) << '\n';
    }
    finish_output(out, path);
}

void write_importance_csv(std::vector<ImportanceEntry> entries, const fs::path& path) {
    // Largest mean drop first; stable so schema order breaks ties.
    std::stable_sort(entries.begin(), entries.end(),
                     [](const ImportanceEntry& a, const ImportanceEntry& b) {
                         return a.mean_drop > b.mean_drop;
                     });
    auto out = open_output(path);
    out << "column,mean_drop,std_dev\n";
    for (const auto& e : entries)
        out << e.column << ',' << csvio::format_double(e.mean_drop) << ','
            << csvio::format_double(e.std_dev) << '\n';
    finish_output(out, path);
}

void write_fraud_rate_csv(const std::vector<LabeledRecord>& records, const fs::path& path) {
    std::map<TimeStep, std::pair<std::uint64_t, std::uint64_t>> counts;  // labeled, illicit
    for (const auto& rec : records) {
        if (rec.label == Label::unknown) continue;
        auto& c = counts[rec.t];
        ++c.first;
        if (rec.label == Label::illicit) ++c.second;
    }
    auto out = open_output(path);
    out << "time_step,labeled,illicit,rate\n";
    for (const auto& [t, c] : counts)
        out << t << ',' << c.first << ',' << c.second << ','
            << csvio::format_double(static_cast<double>(c.second) /
                                    static_cast<double>(c.first))
            << '\n';
    finish_output(out, path);
}

void write_correlation_csv(const FeatureMatrix& matrix, std::span<const int> labels,
                           const fs::path& path) {
    auto corr = feature_label_correlation(matrix, labels);
    auto out = open_output(path);
    out << "column,pearson_r\n";
    for (const auto& column : matrix.columns) {
        out << column << ',';
        const auto& r = corr.at(column);
        if (r.has_value()) out << csvio::format_double(*r);  // absent = zero variance
        out << '\n';
    }
    finish_output(out, path);
}

json confusion_json(const ConfusionMatrix& cm, const std::string& name) {
    json j;
    j["name"] = name;
    j["threshold"] = cm.threshold;
    j["tp"] = cm.tp;
    j["fp"] = cm.fp;
    j["tn"] = cm.tn;
    j["fn"] = cm.fn;
    j["precision"] = cm.precision();
    j["recall"] = cm.recall();
    j["f1"] = cm.f1();
    return j;
}

json sigmoid_to_json(const SigmoidCalibrator& c) {
    return json{{"type", "sigmoid"},
                {"a", c.a},
                {"b", c.b},
                {"orientation_flipped", c.orientation_flipped},
                {"converged", c.converged},
                {"iterations", c.iterations}};
}

SigmoidCalibrator sigmoid_from_json(const json& j) {
    SigmoidCalibrator c;
    c.a = j.at("a").get<double>();
    c.b = j.at("b").get<double>();
    c.orientation_flipped = j.at("orientation_flipped").get<bool>();
    c.converged = j.value("converged", true);
    c.iterations = j.value("iterations", 0);
    return c;
}

json isotonic_to_json(const IsotonicCalibrator& c) {
    return json{
        {"type", "isotonic"}, {"breakpoints", c.breakpoints}, {"values", c.values}};
}

IsotonicCalibrator isotonic_from_json(const json& j) {
    IsotonicCalibrator c;
    c.breakpoints = j.at("breakpoints").get<std::vector<double>>();
    c.values = j.at("values").get<std::vector<double>>();
    if (c.breakpoints.size() != c.values.size() || c.breakpoints.empty())
        throw DataError("isotonic calibrator: breakpoints/values must be equal-length and "
                        "non-empty");
    if (!std::is_sorted(c.breakpoints.begin(), c.breakpoints.end()) ||
        !std::is_sorted(c.values.begin(), c.values.end()))
        throw DataError("isotonic calibrator: breakpoints and values must be nondecreasing");
    return c;
}

// A named score transform: "raw" plus one entry per persisted calibrator.
struct ScoreVariant {
    std::string name;
    std::vector<double> scores;
};

std::vector<ScoreVariant> make_variants(const std::vector<double>& raw,
                                        const std::optional<SigmoidCalibrator>& sigmoid,
                                        const std::optional<IsotonicCalibrator>& isotonic) {
    std::vector<ScoreVariant> variants;
    variants.push_back({"raw", raw});
    if (sigmoid) variants.push_back({"sigmoid", sigmoid->apply(raw)});
    if (isotonic) variants.push_back({"isotonic", isotonic->apply(raw)});
    return variants;
}

// Core supervised metrics for one (split, variant) score vector.
json variant_metrics_json(std::span<const double> scores, std::span<const int> labels) {
    json j;
    j["roc_auc"] = roc_auc(scores, labels);
    j["average_precision"] = average_precision(scores, labels);
    j["brier"] = brier_score(scores, labels);
    return j;
}

// Loads the data triple, recording input digests.
EllipticData load_inputs(const PipelineConfig& config, ManifestBuilder& manifest) {
    if (config.features_csv.empty() || config.edges_csv.empty() || config.classes_csv.empty())
        throw ContractError("features_csv, edges_csv and classes_csv are all required");
    Stopwatch sw;
    EllipticData data = load_elliptic(config.features_csv, config.edges_csv,
                                      config.classes_csv, config.raw_elliptic);
    manifest.input(config.features_csv);
    manifest.input(config.edges_csv);
    manifest.input(config.classes_csv);
    manifest.timing("load_ms", sw.ms());
    return data;
}

void write_matrix_with_sidecar(const FeatureMatrix& m, const fs::path& path,
                               ManifestBuilder& manifest) {
    write_feature_csv(m, path);
    json side;
    side["version"] = kVersionString;
    side["artifact"] = path.filename().string();
    side["provenance"] = m.provenance;
    side["rows"] = m.rows();
    side["columns"] = m.columns;
    side["digest"] = csvio::fnv1a64_file(path);
    fs::path side_path = path;
    side_path += ".manifest.json";
    write_json_file(side, side_path);
    manifest.artifact(path);
    manifest.artifact(side_path);
}

// The causal graph-descriptor matrix for the loaded graph: read from the
// cache file when it exists (validated against the graph), computed and
// written there otherwise.
FeatureMatrix obtain_graph_features(const PipelineConfig& config, const EllipticData& data,
                                    ManifestBuilder& manifest) {
    fs::path cache = config.graph_features_csv.empty()
                         ? config.out_dir / "graph_features_causal.csv"
                         : config.graph_features_csv;
    Stopwatch sw;
    if (fs::exists(cache)) {
        FeatureMatrix m = read_feature_csv(cache);
        const auto& g = data.graph;
        if (m.rows() != g.node_count())
            throw DataError("cached graph features " + cache.string() + " have " +
                            std::to_string(m.rows()) + " rows but the graph has " +
                            std::to_string(g.node_count()) + " nodes");
        auto order = g.time_order();
        for (std::size_t r = 0; r < m.rows(); ++r) {
            NodeId id = g.id_of(order[r]);
            if (m.row_ids[r] != id || m.row_times[r] != g.timestep_of(order[r]))
                throw DataError("cached graph features " + cache.string() +
                                " do not match the loaded graph at row " +
                                std::to_string(r + 1) + " (expected node " +
                                std::to_string(id) + ")");
        }
        m.provenance = "causal";
        manifest.input(cache);
        manifest.timing("graph_features_ms", sw.ms());
        return m;
    }
    FeatureMatrix m =
        extract_causal(data.graph, config.descriptors, resolve_threads(config.threads));
    fs::create_directories(cache.parent_path().empty() ? fs::path(".")
                                                       : cache.parent_path());
    write_matrix_with_sidecar(m, cache, manifest);
    manifest.timing("graph_features_ms", sw.ms());
    return m;
}

}  // namespace

const char* calibration_method_name(CalibrationMethod m) {
    switch (m) {
        case CalibrationMethod::none: return "none";
        case CalibrationMethod::sigmoid: return "sigmoid";
        case CalibrationMethod::isotonic: return "isotonic";
        case CalibrationMethod::both: return "both";
    }
    throw ContractError("calibration_method_name: invalid enum value");
}

CalibrationMethod parse_calibration_method(const std::string& text) {
    if (text == "none") return CalibrationMethod::none;
    if (text == "sigmoid") return CalibrationMethod::sigmoid;
    if (text == "isotonic") return CalibrationMethod::isotonic;
    if (text == "both") return CalibrationMethod::both;
    throw ContractError("unknown calibration method \"" + text +
                        "\" (expected none, sigmoid, isotonic or both)");
}

void PipelineConfig::validate() const {
    split.validate();
    descriptors.validate();
    train.validate();
    if (reliability_bins < 2) throw ContractError("reliability_bins must be >= 2");
    if (topk.empty()) throw ContractError("topk must list at least one K");
    for (std::size_t i = 0; i < topk.size(); ++i) {
        if (topk[i] == 0) throw ContractError("topk values must be >= 1");
        if (i > 0 && topk[i] <= topk[i - 1])
            throw ContractError("topk values must be strictly increasing");
    }
    if (!(threshold_grid_step > 0.0 && threshold_grid_step <= 1.0))
        throw ContractError("threshold_grid_step must lie in (0, 1]");
    double steps = 1.0 / threshold_grid_step;
    if (std::abs(std::round(steps) * threshold_grid_step - 1.0) > 1e-9)
        throw ContractError("threshold_grid_step must evenly divide 1");
    if (threshold_objectives.empty())
        throw ContractError("threshold_objectives must list at least one objective");
    std::set<std::string> seen;
    for (const auto& text : threshold_objectives) {
        std::string canon = ThresholdObjective::parse(text).describe();
        if (!seen.insert(canon).second)
            throw ContractError("duplicate threshold objective \"" + canon + "\"");
    }
    if (importance_repeats < 1) throw ContractError("importance repeats must be >= 1");
    if (importance_max_rows < 2) throw ContractError("importance max_rows must be >= 2");
}

std::vector<double> PipelineConfig::threshold_grid() const {
    auto denom = static_cast<long long>(std::llround(1.0 / threshold_grid_step));
    std::vector<double> grid(static_cast<std::size_t>(denom) + 1);
    for (long long i = 0; i <= denom; ++i)
        grid[static_cast<std::size_t>(i)] =
            static_cast<double>(i) / static_cast<double>(denom);
    return grid;
}

json PipelineConfig::to_json() const {
    json j;
    j["features_csv"] = features_csv.string();
    j["edges_csv"] = edges_csv.string();
    j["classes_csv"] = classes_csv.string();
    j["raw_elliptic"] = raw_elliptic;
    j["graph_features_csv"] = graph_features_csv.string();
    j["out_dir"] = out_dir.string();
    j["seed"] = seed;
    j["threads"] = threads;
    j["split"] = json{{"train_end", split.train_end},
                      {"val_start", split.val_start},
                      {"val_end", split.val_end},
                      {"test_start", split.test_start}};
    j["descriptors"] = json{{"names", descriptors.names},
                            {"pagerank_damping", descriptors.pagerank_damping},
                            {"pagerank_tol", descriptors.pagerank_tol},
                            {"pagerank_max_iter", descriptors.pagerank_max_iter},
                            {"hits_tol", descriptors.hits_tol},
                            {"hits_max_iter", descriptors.hits_max_iter}};
    j["train"] = train.to_json();
    j["feature_config"] = feature_config_name(feature_config);
    j["calibration"] = calibration_method_name(calibration);
    j["metrics"] = json{{"reliability_bins", reliability_bins},
                        {"topk", topk},
                        {"threshold_grid_step", threshold_grid_step},
                        {"threshold_objectives", threshold_objectives}};
    j["importance"] = json{{"repeats", importance_repeats},
                           {"max_rows", importance_max_rows},
                           {"metric", importance_metric_name(importance_metric)}};
    return j;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
    if (!j.is_object()) throw DataError("pipeline config: expected a JSON object");
    reject_unknown_keys(j,
                        {"features_csv", "edges_csv", "classes_csv", "raw_elliptic",
                         "graph_features_csv", "out_dir", "seed", "threads", "split",
                         "descriptors", "train", "feature_config", "calibration", "metrics",
                         "importance"},
                        "pipeline config");
    PipelineConfig cfg;
    cfg.features_csv = j.value("features_csv", std::string());
    cfg.edges_csv = j.value("edges_csv", std::string());
    cfg.classes_csv = j.value("classes_csv", std::string());
    cfg.raw_elliptic = j.value("raw_elliptic", cfg.raw_elliptic);
    cfg.graph_features_csv = j.value("graph_features_csv", std::string());
    cfg.out_dir = j.value("out_dir", std::string());
    cfg.seed = j.value("seed", cfg.seed);
    cfg.threads = j.value("threads", cfg.threads);
    if (j.contains("split")) {
        const json& s = j.at("split");
        reject_unknown_keys(s, {"train_end", "val_start", "val_end", "test_start"}, "split");
        cfg.split.train_end = s.value("train_end", cfg.split.train_end);
        cfg.split.val_start = s.value("val_start", cfg.split.val_start);
        cfg.split.val_end = s.value("val_end", cfg.split.val_end);
        cfg.split.test_start = s.value("test_start", cfg.split.test_start);
    }
    if (j.contains("descriptors")) {
        const json& d = j.at("descriptors");
        reject_unknown_keys(d,
                            {"names", "pagerank_damping", "pagerank_tol", "pagerank_max_iter",
                             "hits_tol", "hits_max_iter"},
                            "descriptors");
        if (d.contains("names"))
            cfg.descriptors.names = d.at("names").get<std::vector<std::string>>();
        cfg.descriptors.pagerank_damping =
            d.value("pagerank_damping", cfg.descriptors.pagerank_damping);
        cfg.descriptors.pagerank_tol = d.value("pagerank_tol", cfg.descriptors.pagerank_tol);
        cfg.descriptors.pagerank_max_iter =
            d.value("pagerank_max_iter", cfg.descriptors.pagerank_max_iter);
        cfg.descriptors.hits_tol = d.value("hits_tol", cfg.descriptors.hits_tol);
        cfg.descriptors.hits_max_iter =
            d.value("hits_max_iter", cfg.descriptors.hits_max_iter);
    }
    if (j.contains("train")) {
        cfg.train = TrainConfig::from_json(j.at("train"));
        // The forest seed follows the run seed unless the file pins it.
        if (!j.at("train").contains("seed")) cfg.train.seed = cfg.seed;
    } else {
        cfg.train.seed = cfg.seed;
    }
    if (j.contains("feature_config"))
        cfg.feature_config = parse_feature_config(j.at("feature_config").get<std::string>());
    if (j.contains("calibration"))
        cfg.calibration = parse_calibration_method(j.at("calibration").get<std::string>());
    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        reject_unknown_keys(
            m, {"reliability_bins", "topk", "threshold_grid_step", "threshold_objectives"},
            "metrics");
        cfg.reliability_bins = m.value("reliability_bins", cfg.reliability_bins);
        if (m.contains("topk")) cfg.topk = m.at("topk").get<std::vector<std::size_t>>();
        cfg.threshold_grid_step = m.value("threshold_grid_step", cfg.threshold_grid_step);
        if (m.contains("threshold_objectives"))
            cfg.threshold_objectives =
                m.at("threshold_objectives").get<std::vector<std::string>>();
    }
    if (j.contains("importance")) {
        const json& imp = j.at("importance");
        reject_unknown_keys(imp, {"repeats", "max_rows", "metric"}, "importance");
        cfg.importance_repeats = imp.value("repeats", cfg.importance_repeats);
        cfg.importance_max_rows = imp.value("max_rows", cfg.importance_max_rows);
        if (imp.contains("metric"))
            cfg.importance_metric = parse_importance_metric(imp.at("metric").get<std::string>());
    }
    return cfg;
}

PipelineConfig PipelineConfig::from_file(const fs::path& path) {
    return from_json(read_json_file(path));
}

ExtractResult run_extract(const PipelineConfig& config, const std::string& mode) {
    if (mode != "causal" && mode != "full" && mode != "both")
        throw ContractError("extract mode must be causal, full or both, got \"" + mode + "\"");
    config.validate();
    if (config.out_dir.empty()) throw ContractError("out_dir is required");
    fs::create_directories(config.out_dir);

    Stopwatch total;
    ManifestBuilder manifest;
    manifest.command = "extract";
    EllipticData data = load_inputs(config, manifest);
    int threads = resolve_threads(config.threads);

    ExtractResult result;
    if (mode == "causal" || mode == "both") {
        Stopwatch sw;
        FeatureMatrix m = extract_causal(data.graph, config.descriptors, threads);
        fs::path path = config.out_dir / "graph_features_causal.csv";
        write_matrix_with_sidecar(m, path, manifest);
        manifest.timing("causal_ms", sw.ms());
        result.causal_csv = path;
    }
    if (mode == "full" || mode == "both") {
        Stopwatch sw;
        FeatureMatrix m = extract_full(data.graph, config.descriptors);
        fs::path path = config.out_dir / "graph_features_full.csv";
        write_matrix_with_sidecar(m, path, manifest);
        manifest.timing("full_ms", sw.ms());
        result.full_csv = path;
    }
    manifest.timing("total_ms", total.ms());
    manifest.write(config, config.out_dir / "extract_manifest.json",
                   json{{"mode", mode}});
    return result;
}

AuditResult run_audit(const PipelineConfig& config, const fs::path& causal_csv,
                      const fs::path& full_csv, double tol) {
    if (config.out_dir.empty()) throw ContractError("out_dir is required");
    fs::create_directories(config.out_dir);

    Stopwatch total;
    ManifestBuilder manifest;
    manifest.command = "audit";
    FeatureMatrix causal = read_feature_csv(causal_csv);
    FeatureMatrix full = read_feature_csv(full_csv);
    manifest.input(causal_csv);
    manifest.input(full_csv);

    LeakageAuditReport report = leakage_audit(causal, full, tol);

    AuditResult result;
    result.columns_csv = config.out_dir / "leakage_columns.csv";
    {
        auto out = open_output(result.columns_csv);
        out << "column,differing_fraction,mean_abs_diff\n";
        for (const auto& c : report.columns)
            out << c.column << ',' << csvio::format_double(c.differing_fraction) << ','
                << csvio::format_double(c.mean_abs_diff) << '\n';
        finish_output(out, result.columns_csv);
    }
    result.timesteps_csv = config.out_dir / "leakage_timesteps.csv";
    {
        auto out = open_output(result.timesteps_csv);
        out << "time_step,rows,differing_row_fraction,mean_abs_diff\n";
        for (const auto& t : report.timesteps)
            out << t.t << ',' << t.rows << ','
                << csvio::format_double(t.differing_row_fraction) << ','
                << csvio::format_double(t.mean_abs_diff) << '\n';
        finish_output(out, result.timesteps_csv);
    }
    manifest.artifact(result.columns_csv);
    manifest.artifact(result.timesteps_csv);
    manifest.timing("total_ms", total.ms());
    manifest.write(config, config.out_dir / "audit_manifest.json",
                   json{{"tolerance", report.tolerance}});
    return result;
}

std::filesystem::path run_train(const PipelineConfig& config) {
    config.validate();
    if (config.out_dir.empty()) throw ContractError("out_dir is required");
    fs::create_directories(config.out_dir);

    Stopwatch total;
    ManifestBuilder manifest;
    manifest.command = "train";
    EllipticData data = load_inputs(config, manifest);

    FeatureMatrix graph_features;
    if (config.feature_config != FeatureConfig::T)
        graph_features = obtain_graph_features(config, data, manifest);

    SplitBundle bundle = make_splits(data.records, data.transactions, graph_features,
                                     config.split, config.feature_config);

    TrainConfig tc = config.train;
    tc.threads = config.threads;
    Stopwatch fit_sw;
    ForestModel model = ForestModel::fit(bundle.train.matrix, bundle.train.labels, tc);
    manifest.timing("fit_ms", fit_sw.ms());

    Stopwatch cal_sw;
    std::vector<double> val_raw = model.predict_proba(bundle.validation.matrix);
    std::optional<SigmoidCalibrator> sigmoid;
    std::optional<IsotonicCalibrator> isotonic;
    if (config.calibration == CalibrationMethod::sigmoid ||
        config.calibration == CalibrationMethod::both)
        sigmoid = fit_sigmoid(val_raw, bundle.validation.labels);
    if (config.calibration == CalibrationMethod::isotonic ||
        config.calibration == CalibrationMethod::both)
        isotonic = fit_isotonic(val_raw, bundle.validation.labels);

    auto variants = make_variants(val_raw, sigmoid, isotonic);

    // Per-variant validation metrics and operating thresholds; an infeasible
    // constraint is recorded as null rather than failing the run.
    json validation_metrics = json::object();
    json selected = json::object();
    for (const auto& variant : variants) {
        validation_metrics[variant.name] =
            variant_metrics_json(variant.scores, bundle.validation.labels);
        json per_objective = json::object();
        for (const auto& text : config.threshold_objectives) {
            auto objective = ThresholdObjective::parse(text);
            try {
                per_objective[objective.describe()] =
                    select_threshold(variant.scores, bundle.validation.labels, objective);
            } catch (const DataError&) {
                per_objective[objective.describe()] = nullptr;
            }
        }
        selected[variant.name] = std::move(per_objective);
    }
    manifest.timing("calibrate_ms", cal_sw.ms());

    json mj = model.to_json();
    json pipeline_block;
    pipeline_block["version"] = kVersionString;
    pipeline_block["feature_config"] = feature_config_name(bundle.config);
    json calibrators = json::object();
    if (sigmoid) calibrators["sigmoid"] = sigmoid_to_json(*sigmoid);
    if (isotonic) calibrators["isotonic"] = isotonic_to_json(*isotonic);
    pipeline_block["calibrators"] = calibrators;
    pipeline_block["selected_thresholds"] = selected;
    pipeline_block["validation_metrics"] = validation_metrics;
    mj["pipeline"] = pipeline_block;

    fs::path model_path = config.out_dir / "model.json";
    write_json_file(mj, model_path);
    manifest.artifact(model_path);

    json vm;
    vm["version"] = kVersionString;
    vm["feature_config"] = feature_config_name(bundle.config);
    vm["variants"] = validation_metrics;
    vm["selected_thresholds"] = selected;
    fs::path vm_path = config.out_dir / "validation_metrics.json";
    write_json_file(vm, vm_path);
    manifest.artifact(vm_path);

    manifest.timing("total_ms", total.ms());
    manifest.write(config, config.out_dir / "train_manifest.json");
    return model_path;
}

void run_evaluate(const PipelineConfig& config, const fs::path& model_path) {
    config.validate();
    if (config.out_dir.empty()) throw ContractError("out_dir is required");
    fs::create_directories(config.out_dir);

    Stopwatch total;
    ManifestBuilder manifest;
    manifest.command = "evaluate";

    json mj = read_json_file(model_path);
    ForestModel model = ForestModel::from_json(mj);
    manifest.input(model_path);
    if (!mj.contains("pipeline"))
        throw DataError(model_path.string() +
                        ": model file lacks the pipeline metadata block (was it produced by "
                        "the train command?)");
    const json& pipeline_block = mj.at("pipeline");
    FeatureConfig feature_config =
        parse_feature_config(pipeline_block.at("feature_config").get<std::string>());
    std::optional<SigmoidCalibrator> sigmoid;
    std::optional<IsotonicCalibrator> isotonic;
    const json& calibrators = pipeline_block.at("calibrators");
    if (calibrators.contains("sigmoid"))
        sigmoid = sigmoid_from_json(calibrators.at("sigmoid"));
    if (calibrators.contains("isotonic"))
        isotonic = isotonic_from_json(calibrators.at("isotonic"));
    json selected = pipeline_block.value("selected_thresholds", json::object());

    EllipticData data = load_inputs(config, manifest);
    FeatureMatrix graph_features;
    if (feature_config != FeatureConfig::T)
        graph_features = obtain_graph_features(config, data, manifest);
    SplitBundle bundle = make_splits(data.records, data.transactions, graph_features,
                                     config.split, feature_config);

    auto grid = config.threshold_grid();
    json summary;
    summary["version"] = kVersionString;
    summary["feature_config"] = feature_config_name(feature_config);
    summary["model_fingerprint"] = model.fingerprint();
    json splits_json = json::object();

    Stopwatch score_sw;
    for (const Split* split : {&bundle.validation, &bundle.test}) {
        std::vector<double> raw = model.predict_proba(split->matrix);
        auto variants = make_variants(raw, sigmoid, isotonic);

        json split_json;
        split_json["n"] = split->labels.size();
        split_json["positives"] = static_cast<std::uint64_t>(
            std::count(split->labels.begin(), split->labels.end(), 1));
        json variants_json = json::object();
        for (const auto& variant : variants) {
            json vj = variant_metrics_json(variant.scores, split->labels);

            json confusions = json::array();
            for (double fixed : {0.5, 0.8}) {
                auto cm = confusion_at(variant.scores, split->labels, fixed);
                confusions.push_back(confusion_json(
                    cm, "fixed_" + csvio::format_double(fixed)));
            }
            if (selected.contains(variant.name)) {
                for (const auto& item : selected.at(variant.name).items()) {
                    if (item.value().is_null()) {
                        json entry;
                        entry["name"] = item.key();
                        entry["threshold"] = nullptr;  // infeasible on validation
                        confusions.push_back(entry);
                        continue;
                    }
                    auto cm = confusion_at(variant.scores, split->labels,
                                           item.value().get<double>());
                    confusions.push_back(confusion_json(cm, item.key()));
                }
            }
            vj["confusions"] = confusions;

            json pk = json::array();
            for (std::size_t k : config.topk) {
                if (k == 0 || k > variant.scores.size()) continue;
                pk.push_back(json{
                    {"k", k},
                    {"precision", precision_at_k(variant.scores, split->labels, k)}});
            }
            vj["precision_at_k"] = pk;
            variants_json[variant.name] = vj;

            const std::string stem = "_" + split->name + "_" + variant.name;
            auto roc_path = config.out_dir / ("roc" + stem + ".csv");
            write_curve_csv(roc_curve(variant.scores, split->labels), roc_path);
            manifest.artifact(roc_path);
            auto pr_path = config.out_dir / ("pr" + stem + ".csv");
            write_curve_csv(pr_curve(variant.scores, split->labels), pr_path);
            manifest.artifact(pr_path);
            auto sweep_path = config.out_dir / ("sweep" + stem + ".csv");
            write_curve_csv(threshold_sweep(variant.scores, split->labels, grid), sweep_path);
            manifest.artifact(sweep_path);
            auto rel_path = config.out_dir / ("reliability" + stem + ".csv");
            write_reliability_csv(
                reliability_table(variant.scores, split->labels, config.reliability_bins),
                rel_path);
            manifest.artifact(rel_path);
            auto topk_path = config.out_dir / ("topk" + stem + ".csv");
            write_topk_csv(variant.scores, split->labels, config.topk, topk_path);
            manifest.artifact(topk_path);
        }
        split_json["variants"] = variants_json;
        splits_json[split->name] = split_json;
    }
    summary["splits"] = splits_json;
    manifest.timing("score_ms", score_sw.ms());

    fs::path summary_path = config.out_dir / "summary.json";
    write_json_file(summary, summary_path);
    manifest.artifact(summary_path);

    // Permutation importance on the test split (raw scores); large splits are
    // subsampled deterministically to keep the cost bounded.
    Stopwatch imp_sw;
    {
        const Split& test = bundle.test;
        const FeatureMatrix* rows = &test.matrix;
        std::span<const int> labels = test.labels;
        FeatureMatrix sub;
        std::vector<int> sub_labels;
        if (test.matrix.rows() > config.importance_max_rows) {
            std::vector<std::size_t> idx(test.matrix.rows());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            Rng rng(derive_seed(config.seed, kImportanceSubsampleStream));
            rng.shuffle(std::span<std::size_t>(idx));
            idx.resize(config.importance_max_rows);
            std::sort(idx.begin(), idx.end());
            sub.columns = test.matrix.columns;
            sub.provenance = test.matrix.provenance;
            sub.values.reserve(idx.size() * sub.columns.size());
            for (std::size_t r : idx) {
                sub.row_ids.push_back(test.matrix.row_ids[r]);
                sub.row_times.push_back(test.matrix.row_times[r]);
                auto row = test.matrix.row(r);
                sub.values.insert(sub.values.end(), row.begin(), row.end());
                sub_labels.push_back(test.labels[r]);
            }
            rows = &sub;
            labels = sub_labels;
        }
        auto entries =
            permutation_importance(model, *rows, labels, config.importance_metric,
                                   config.importance_repeats, config.seed);
        fs::path imp_path = config.out_dir / "permutation_importance.csv";
        write_importance_csv(std::move(entries), imp_path);
        manifest.artifact(imp_path);
    }
    manifest.timing("importance_ms", imp_sw.ms());

    fs::path rate_path = config.out_dir / "fraud_rate_by_timestep.csv";
    write_fraud_rate_csv(data.records, rate_path);
    manifest.artifact(rate_path);

    fs::path corr_path = config.out_dir / "feature_label_correlation.csv";
    write_correlation_csv(bundle.train.matrix, bundle.train.labels, corr_path);
    manifest.artifact(corr_path);

    manifest.timing("total_ms", total.ms());
    manifest.write(config, config.out_dir / "evaluate_manifest.json");
}

}  // namespace fraudkit
