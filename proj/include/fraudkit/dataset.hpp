#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fraudkit/feature_matrix.hpp"
#include "fraudkit/temporal_graph.hpp"

namespace fraudkit {

enum class Label : std::uint8_t { licit = 0, illicit = 1, unknown = 2 };

struct LabeledRecord {
    NodeId node = 0;
    TimeStep t = 0;
    Label label = Label::unknown;
};

// Chronological split boundaries (inclusive): train [1, train_end],
// validation [val_start, val_end], test [test_start, inf).
struct SplitSpec {
    TimeStep train_end = 34;
    TimeStep val_start = 35;
    TimeStep val_end = 41;
    TimeStep test_start = 42;

    void validate() const;  // ContractError unless train_end < val_start <= val_end < test_start
};

enum class FeatureConfig { T, G, TG };

const char* feature_config_name(FeatureConfig config);            // "T" / "G" / "TG"
FeatureConfig parse_feature_config(const std::string& text);      // ContractError on junk

struct Split {
    std::string name;  // "train" / "validation" / "test"
    FeatureMatrix matrix;
    std::vector<int> labels;  // aligned, 0 licit / 1 illicit
};

struct SplitBundle {
    FeatureConfig config = FeatureConfig::TG;
    Split train, validation, test;
};

struct EllipticData {
    TemporalGraph graph;
    FeatureMatrix transactions;         // provenance "transaction"
    std::vector<LabeledRecord> records; // one per node, ordered by (timestep, id)
};

// Reads the three Elliptic-format files and assembles the graph, the raw
// transaction-attribute matrix, and per-node labels. With `raw_elliptic` the
// features file is the header-less 167-column original layout (id, timestep,
// 165 attributes) and attribute columns get synthetic names tx_feat_0..N;
// class codes "1"→illicit, "2"→licit. Unknown-labeled nodes stay in the graph
// (they shape topology) and are excluded later from supervised splits.
EllipticData load_elliptic(const std::filesystem::path& features_path,
                           const std::filesystem::path& edges_path,
                           const std::filesystem::path& classes_path,
                           bool raw_elliptic = false);

// Routes labeled records into chronological splits and assembles the feature
// matrix for the requested configuration: T = transaction attributes only,
// G = graph descriptors only, TG = transaction columns then graph columns.
// `graph_features` may be empty for config T (it is ignored).
SplitBundle make_splits(const std::vector<LabeledRecord>& records,
                        const FeatureMatrix& transactions,
                        const FeatureMatrix& graph_features, const SplitSpec& spec,
                        FeatureConfig config);

// Illicit share among labeled records per timestep; timesteps with no
// labeled records are omitted.
std::map<TimeStep, double> fraud_rate_by_timestep(const std::vector<LabeledRecord>& records);

}  // namespace fraudkit
