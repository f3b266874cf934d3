#pragma once

#include <stdexcept>
#include <string>

namespace senet {

// Error taxonomy. Dimension errors are programming/shape bugs, contract
// errors are misuse of a documented precondition, the rest map to the
// obvious IO/parse/format failures.
struct DimError : std::runtime_error {
    explicit DimError(const std::string& msg) : std::runtime_error("dimension error: " + msg) {}
};

struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error("contract error: " + msg) {}
};

struct DegenerateTargetError : std::runtime_error {
    explicit DegenerateTargetError(const std::string& msg)
        : std::runtime_error("degenerate target: " + msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error("parse error: " + msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};

}  // namespace senet
