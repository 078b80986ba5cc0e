#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fraudkit/temporal_graph.hpp"

namespace fraudkit {

// Row-per-node numeric table with a named, ordered column schema. The CSV
// form is `node_id,time_step,<col...>` with full-precision round-trip floats,
// so writing and re-reading is lossless.
struct FeatureMatrix {
    std::vector<NodeId> row_ids;
    std::vector<TimeStep> row_times;
    std::vector<std::string> columns;
    std::vector<double> values;  // row-major, rows() * cols()
    std::string provenance;      // "causal", "full", "transaction"

    std::size_t rows() const { return row_ids.size(); }
    std::size_t cols() const { return columns.size(); }

    double at(std::size_t r, std::size_t c) const { return values[r * columns.size() + c]; }
    double& at(std::size_t r, std::size_t c) { return values[r * columns.size() + c]; }
    std::span<const double> row(std::size_t r) const {
        return {values.data() + r * columns.size(), columns.size()};
    }

    std::optional<std::size_t> column_index(std::string_view name) const;

    // Structural invariants (sizes, unique CSV-safe column names);
    // ContractError on violation.
    void check_consistent() const;
    // DataError naming the first non-finite cell, if any.
    void require_finite() const;
};

void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix read_feature_csv(const std::filesystem::path& path);

}  // namespace fraudkit
