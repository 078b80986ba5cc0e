#pragma once

#include <stdexcept>
#include <string>

namespace fraudkit {

// Bad data: malformed input files, unknown ids, degenerate label sets.
// The CLI maps this to exit code 1.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse: schema mismatches, invalid configuration, violated call
// preconditions. The CLI maps this to exit code 2.
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace fraudkit
