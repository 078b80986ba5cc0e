#include "fraudkit/csv.hpp"

#include <array>
#include <charconv>
#include <system_error>

#include "fraudkit/errors.hpp"

namespace fraudkit::csvio {

std::string format_double(double v) {
    std::array<char, 40> buf;
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw ContractError("format_double: conversion failed");
    return std::string(buf.data(), ptr);
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

[[noreturn]] void bad_field(std::string_view field, const std::string& where,
                            const char* kind) {
    throw DataError("expected " + std::string(kind) + " at " + where + ", got \"" +
                    std::string(field) + "\"");
}

}  // namespace

double parse_double(std::string_view field, const std::string& where) {
    std::string_view s = trim(field);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        bad_field(field, where, "a number");
    return value;
}

std::int64_t parse_int(std::string_view field, const std::string& where) {
    std::string_view s = trim(field);
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        bad_field(field, where, "an integer");
    return value;
}

std::uint64_t parse_uint(std::string_view field, const std::string& where) {
    std::string_view s = trim(field);
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        bad_field(field, where, "a non-negative integer");
    return value;
}

bool looks_like_uint(std::string_view field) {
    std::string_view s = trim(field);
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

Reader::Reader(const std::filesystem::path& path)
    : in_(path), path_(path.string()) {
    if (!in_) throw DataError("cannot open " + path_);
}

bool Reader::next_row(std::vector<std::string_view>& fields) {
    fields.clear();
    if (!std::getline(in_, line_)) return false;
    ++line_number_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    std::string_view rest = line_;
    for (;;) {
        std::size_t comma = rest.find(',');
        if (comma == std::string_view::npos) {
            fields.push_back(rest);
            break;
        }
        fields.push_back(rest.substr(0, comma));
        rest.remove_prefix(comma + 1);
    }
    return true;
}

std::string Reader::where(std::size_t column_1based) const {
    std::string s = path_ + " line " + std::to_string(line_number_);
    if (column_1based > 0) s += " column " + std::to_string(column_1based);
    return s;
}

void write_row(std::ostream& out, std::span<const std::string> fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << fields[i];
    }
    out << '\n';
}

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::string fnv_to_string(std::uint64_t h) {
    static const char* hex = "0123456789abcdef";
    std::string out = "fnv1a64:";
    for (int shift = 60; shift >= 0; shift -= 4) out += hex[(h >> shift) & 0xf];
    return out;
}

}  // namespace

std::string fnv1a64_bytes(std::string_view bytes) {
    std::uint64_t h = kFnvOffset;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return fnv_to_string(h);
}

std::string fnv1a64_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string() + " for digest");
    std::uint64_t h = kFnvOffset;
    std::array<char, 65536> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= kFnvPrime;
        }
    }
    return fnv_to_string(h);
}

}  // namespace fraudkit::csvio
