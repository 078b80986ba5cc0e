#include "fraudkit/dataset.hpp"

#include <algorithm>
#include <unordered_map>

#include "fraudkit/csv.hpp"
#include "fraudkit/errors.hpp"

namespace fraudkit {

void SplitSpec::validate() const {
    if (train_end < 1 || val_start < 1 || val_end < 1 || test_start < 1)
        throw ContractError("split spec: timesteps are 1-based");
    if (!(train_end < val_start && val_start <= val_end && val_end < test_start))
        throw ContractError(
            "split spec: need train_end < val_start <= val_end < test_start, got " +
            std::to_string(train_end) + " / " + std::to_string(val_start) + "-" +
            std::to_string(val_end) + " / " + std::to_string(test_start));
}

const char* feature_config_name(FeatureConfig config) {
    switch (config) {
        case FeatureConfig::T: return "T";
        case FeatureConfig::G: return "G";
        case FeatureConfig::TG: return "TG";
    }
    return "?";
}

FeatureConfig parse_feature_config(const std::string& text) {
    if (text == "T") return FeatureConfig::T;
    if (text == "G") return FeatureConfig::G;
    if (text == "TG" || text == "T+G") return FeatureConfig::TG;
    throw ContractError("unknown feature configuration \"" + text + "\" (want T, G, or TG)");
}

namespace {

Label parse_label(std::string_view field, const std::string& where) {
    if (field == "1" || field == "illicit") return Label::illicit;
    if (field == "2" || field == "licit") return Label::licit;
    if (field == "unknown") return Label::unknown;
    throw DataError("unknown class code \"" + std::string(field) + "\" at " + where +
                    " (want 1, 2, illicit, licit, or unknown)");
}

// Raw Elliptic features files are header-less; canonical files start with
// node_id,time_step. Distinguishes by the first field of the first line.
bool header_present(const std::filesystem::path& path) {
    csvio::Reader probe(path);
    std::vector<std::string_view> fields;
    if (!probe.next_row(fields)) throw DataError(path.string() + " is empty");
    return !csvio::looks_like_uint(fields[0]);
}

}  // namespace

EllipticData load_elliptic(const std::filesystem::path& features_path,
                           const std::filesystem::path& edges_path,
                           const std::filesystem::path& classes_path, bool raw_elliptic) {
    EllipticData data;
    std::vector<std::string_view> fields;

    // --- features file: nodes, timesteps, transaction attributes ---
    struct PendingRow {
        NodeId id;
        TimeStep t;
        std::size_t offset;  // into flat value buffer
    };
    std::vector<PendingRow> pending;
    std::vector<double> flat;
    std::size_t n_attr = 0;

    {
        csvio::Reader reader(features_path);
        bool first = true;
        bool expect_header = !raw_elliptic;
        while (reader.next_row(fields)) {
            if (fields.size() == 1 && fields[0].empty()) continue;
            if (first) {
                first = false;
                if (fields.size() < 2)
                    throw DataError(reader.where() + ": need at least id and timestep columns");
                if (expect_header) {
                    if (fields[0] != "node_id" || fields[1] != "time_step")
                        throw DataError(features_path.string() +
                                        ": header must start with node_id,time_step "
                                        "(use the raw-elliptic flag for header-less files)");
                    n_attr = fields.size() - 2;
                    for (std::size_t c = 2; c < fields.size(); ++c)
                        data.transactions.columns.emplace_back(fields[c]);
                    continue;
                }
                n_attr = fields.size() - 2;
                for (std::size_t c = 0; c < n_attr; ++c)
                    data.transactions.columns.push_back("tx_feat_" + std::to_string(c));
                // fall through: this row is data
            }
            if (fields.size() != n_attr + 2)
                throw DataError(reader.where() + ": expected " + std::to_string(n_attr + 2) +
                                " fields, got " + std::to_string(fields.size()));
            PendingRow row;
            row.id = csvio::parse_uint(fields[0], reader.where(1));
            std::uint64_t t = csvio::parse_uint(fields[1], reader.where(2));
            if (t == 0) throw DataError(reader.where(2) + ": timestep must be >= 1");
            row.t = static_cast<TimeStep>(t);
            row.offset = flat.size();
            for (std::size_t c = 0; c < n_attr; ++c)
                flat.push_back(csvio::parse_double(fields[c + 2], reader.where(c + 3)));
            pending.push_back(row);

            try {
                data.graph.add_node(row.id, row.t);
            } catch (const DataError& e) {
                throw DataError(reader.where() + ": " + e.what());
            }
        }
    }
    if (pending.empty()) throw DataError(features_path.string() + ": no data rows");

    // --- edges file ---
    {
        csvio::Reader reader(edges_path);
        bool first = true;
        while (reader.next_row(fields)) {
            if (fields.size() == 1 && fields[0].empty()) continue;
            if (first) {
                first = false;
                if (!csvio::looks_like_uint(fields[0])) continue;  // header row
            }
            if (fields.size() != 2)
                throw DataError(reader.where() + ": expected src_id,dst_id");
            NodeId src = csvio::parse_uint(fields[0], reader.where(1));
            NodeId dst = csvio::parse_uint(fields[1], reader.where(2));
            try {
                data.graph.add_edge(src, dst);
            } catch (const DataError& e) {
                throw DataError(reader.where() + ": " + e.what());
            }
        }
    }

    // --- classes file ---
    std::unordered_map<NodeId, Label> label_of;
    {
        csvio::Reader reader(classes_path);
        bool first = true;
        while (reader.next_row(fields)) {
            if (fields.size() == 1 && fields[0].empty()) continue;
            if (first) {
                first = false;
                if (!csvio::looks_like_uint(fields[0])) continue;  // header row
            }
            if (fields.size() != 2)
                throw DataError(reader.where() + ": expected node_id,class");
            NodeId id = csvio::parse_uint(fields[0], reader.where(1));
            if (!data.graph.has_node(id))
                throw DataError(reader.where() + ": class row for unknown node " +
                                std::to_string(id));
            Label label = parse_label(fields[1], reader.where(2));
            if (!label_of.emplace(id, label).second)
                throw DataError(reader.where() + ": duplicate class row for node " +
                                std::to_string(id));
        }
    }

    data.graph.finalize();

    // Canonical (timestep, id) row order for the matrix and the records;
    // input row permutations cannot change any downstream artifact.
    std::vector<std::size_t> order(pending.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pending[a].t != pending[b].t) return pending[a].t < pending[b].t;
        return pending[a].id < pending[b].id;
    });

    data.transactions.provenance = "transaction";
    data.transactions.row_ids.reserve(pending.size());
    data.transactions.row_times.reserve(pending.size());
    data.transactions.values.reserve(flat.size());
    data.records.reserve(pending.size());
    for (std::size_t i : order) {
        const PendingRow& row = pending[i];
        data.transactions.row_ids.push_back(row.id);
        data.transactions.row_times.push_back(row.t);
        for (std::size_t c = 0; c < n_attr; ++c)
            data.transactions.values.push_back(flat[row.offset + c]);

        LabeledRecord rec;
        rec.node = row.id;
        rec.t = row.t;
        auto it = label_of.find(row.id);
        rec.label = it == label_of.end() ? Label::unknown : it->second;
        data.records.push_back(rec);
    }
    data.transactions.check_consistent();
    return data;
}

namespace {

enum class Route { train, validation, test, none };

Route route_of(TimeStep t, const SplitSpec& spec) {
    if (t <= spec.train_end) return Route::train;
    if (t >= spec.val_start && t <= spec.val_end) return Route::validation;
    if (t >= spec.test_start) return Route::test;
    return Route::none;  // gap between split ranges
}

}  // namespace

SplitBundle make_splits(const std::vector<LabeledRecord>& records,
                        const FeatureMatrix& transactions,
                        const FeatureMatrix& graph_features, const SplitSpec& spec,
                        FeatureConfig config) {
    spec.validate();
    const bool want_tx = config != FeatureConfig::G;
    const bool want_graph = config != FeatureConfig::T;

    if (want_tx && transactions.rows() == 0)
        throw ContractError("make_splits: transaction matrix required for config " +
                            std::string(feature_config_name(config)));
    if (want_graph && graph_features.rows() == 0)
        throw ContractError("make_splits: graph feature matrix required for config " +
                            std::string(feature_config_name(config)));

    // Combined schema: transaction columns first, then graph columns.
    std::vector<std::string> columns;
    if (want_tx) columns.insert(columns.end(), transactions.columns.begin(),
                                transactions.columns.end());
    if (want_graph)
        for (const std::string& c : graph_features.columns) {
            if (std::find(columns.begin(), columns.end(), c) != columns.end())
                throw ContractError("make_splits: column \"" + c +
                                    "\" appears in both transaction and graph matrices");
            columns.push_back(c);
        }

    std::unordered_map<NodeId, std::size_t> tx_row, gf_row;
    if (want_tx) {
        tx_row.reserve(transactions.rows());
        for (std::size_t r = 0; r < transactions.rows(); ++r)
            tx_row.emplace(transactions.row_ids[r], r);
    }
    if (want_graph) {
        gf_row.reserve(graph_features.rows());
        for (std::size_t r = 0; r < graph_features.rows(); ++r)
            gf_row.emplace(graph_features.row_ids[r], r);
    }

    SplitBundle bundle;
    bundle.config = config;
    bundle.train.name = "train";
    bundle.validation.name = "validation";
    bundle.test.name = "test";
    for (Split* s : {&bundle.train, &bundle.validation, &bundle.test}) {
        s->matrix.columns = columns;
        s->matrix.provenance = "split";
    }

    // Records are already (timestep, id)-ordered; appending in order keeps
    // every split sorted the same way.
    for (const LabeledRecord& rec : records) {
        if (rec.label == Label::unknown) continue;
        Route route = route_of(rec.t, spec);
        if (route == Route::none) continue;
        Split& split = route == Route::train        ? bundle.train
                       : route == Route::validation ? bundle.validation
                                                    : bundle.test;
        split.matrix.row_ids.push_back(rec.node);
        split.matrix.row_times.push_back(rec.t);
        split.labels.push_back(rec.label == Label::illicit ? 1 : 0);
        if (want_tx) {
            auto it = tx_row.find(rec.node);
            if (it == tx_row.end())
                throw ContractError("make_splits: node " + std::to_string(rec.node) +
                                    " missing from the transaction matrix");
            auto row = transactions.row(it->second);
            split.matrix.values.insert(split.matrix.values.end(), row.begin(), row.end());
        }
        if (want_graph) {
            auto it = gf_row.find(rec.node);
            if (it == gf_row.end())
                throw ContractError("make_splits: node " + std::to_string(rec.node) +
                                    " missing from the graph feature matrix");
            auto row = graph_features.row(it->second);
            split.matrix.values.insert(split.matrix.values.end(), row.begin(), row.end());
        }
    }

    auto require_nonempty = [&](const Split& s, TimeStep lo, TimeStep hi, bool open_end) {
        if (!s.matrix.rows()) {
            std::string range = open_end ? "[" + std::to_string(lo) + ", inf)"
                                         : "[" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
            throw DataError("empty " + s.name + " split for timesteps " + range);
        }
    };
    require_nonempty(bundle.train, 1, spec.train_end, false);
    require_nonempty(bundle.validation, spec.val_start, spec.val_end, false);
    require_nonempty(bundle.test, spec.test_start, 0, true);

    for (Split* s : {&bundle.train, &bundle.validation, &bundle.test})
        s->matrix.check_consistent();
    return bundle;
}

std::map<TimeStep, double> fraud_rate_by_timestep(const std::vector<LabeledRecord>& records) {
    std::map<TimeStep, std::pair<std::uint64_t, std::uint64_t>> counts;  // t -> (illicit, licit)
    for (const LabeledRecord& rec : records) {
        if (rec.label == Label::unknown) continue;
        auto& c = counts[rec.t];
        if (rec.label == Label::illicit)
            c.first++;
        else
            c.second++;
    }
    std::map<TimeStep, double> rates;
    for (const auto& [t, c] : counts)
        rates[t] = static_cast<double>(c.first) / static_cast<double>(c.first + c.second);
    return rates;
}

}  // namespace fraudkit
