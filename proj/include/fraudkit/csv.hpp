#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fraudkit::csvio {

// Shortest decimal string that round-trips the exact double (std::to_chars).
std::string format_double(double v);

// Strict parsers; `where` (e.g. "features.csv line 12 column 3") goes into the
// DataError message on failure.
double parse_double(std::string_view field, const std::string& where);
std::int64_t parse_int(std::string_view field, const std::string& where);
std::uint64_t parse_uint(std::string_view field, const std::string& where);

bool looks_like_uint(std::string_view field);

// Line-oriented comma splitter. Fields are views into an internal buffer that
// stay valid until the next next_row() call. No quoting: none of the formats
// this tool reads or writes ever quote fields.
class Reader {
public:
    explicit Reader(const std::filesystem::path& path);  // DataError if unopenable

    bool next_row(std::vector<std::string_view>& fields);
    std::size_t line_number() const { return line_number_; }
    const std::string& path_string() const { return path_; }
    std::string where(std::size_t column_1based = 0) const;

private:
    std::ifstream in_;
    std::string path_;
    std::string line_;
    std::size_t line_number_ = 0;
};

void write_row(std::ostream& out, std::span<const std::string> fields);

// "fnv1a64:<16 hex digits>" content digest (integrity hint, not security).
std::string fnv1a64_file(const std::filesystem::path& path);
std::string fnv1a64_bytes(std::string_view bytes);

}  // namespace fraudkit::csvio
