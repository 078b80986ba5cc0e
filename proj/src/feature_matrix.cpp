#include "fraudkit/feature_matrix.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

#include "fraudkit/csv.hpp"
#include "fraudkit/errors.hpp"

namespace fraudkit {

std::optional<std::size_t> FeatureMatrix::column_index(std::string_view name) const {
    for (std::size_t c = 0; c < columns.size(); ++c)
        if (columns[c] == name) return c;
    return std::nullopt;
}

void FeatureMatrix::check_consistent() const {
    if (row_times.size() != row_ids.size())
        throw ContractError("feature matrix: row_times/row_ids size mismatch");
    if (values.size() != rows() * cols())
        throw ContractError("feature matrix: values size " + std::to_string(values.size()) +
                            " != rows*cols " + std::to_string(rows() * cols()));
    std::unordered_set<std::string_view> seen;
    for (const std::string& c : columns) {
        if (c.empty() || c.find(',') != std::string::npos || c.find('\n') != std::string::npos)
            throw ContractError("feature matrix: column name not CSV-safe: \"" + c + "\"");
        if (!seen.insert(c).second)
            throw ContractError("feature matrix: duplicate column \"" + c + "\"");
    }
}

void FeatureMatrix::require_finite() const {
    for (std::size_t r = 0; r < rows(); ++r)
        for (std::size_t c = 0; c < cols(); ++c)
            if (!std::isfinite(at(r, c)))
                throw DataError("non-finite value in column \"" + columns[c] + "\" at row " +
                                std::to_string(r) + " (node " + std::to_string(row_ids[r]) + ")");
}

void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
    m.check_consistent();
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << "node_id,time_step";
    for (const std::string& c : m.columns) out << ',' << c;
    out << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out << m.row_ids[r] << ',' << m.row_times[r];
        for (std::size_t c = 0; c < m.cols(); ++c)
            out << ',' << csvio::format_double(m.at(r, c));
        out << '\n';
    }
    if (!out) throw DataError("write failed for " + path.string());
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
    csvio::Reader reader(path);
    std::vector<std::string_view> fields;
    if (!reader.next_row(fields))
        throw DataError(path.string() + " is empty; expected a header row");
    if (fields.size() < 2 || fields[0] != "node_id" || fields[1] != "time_step")
        throw DataError(path.string() + ": header must start with node_id,time_step");

    FeatureMatrix m;
    for (std::size_t c = 2; c < fields.size(); ++c) m.columns.emplace_back(fields[c]);
    const std::size_t want = fields.size();
    while (reader.next_row(fields)) {
        if (fields.size() == 1 && fields[0].empty()) continue;  // trailing blank line
        if (fields.size() != want)
            throw DataError(reader.where() + ": expected " + std::to_string(want) +
                            " fields, got " + std::to_string(fields.size()));
        m.row_ids.push_back(csvio::parse_uint(fields[0], reader.where(1)));
        std::uint64_t t = csvio::parse_uint(fields[1], reader.where(2));
        if (t == 0) throw DataError(reader.where(2) + ": timestep must be >= 1");
        m.row_times.push_back(static_cast<TimeStep>(t));
        for (std::size_t c = 2; c < want; ++c)
            m.values.push_back(csvio::parse_double(fields[c], reader.where(c + 1)));
    }
    m.check_consistent();
    return m;
}

}  // namespace fraudkit
