#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tttnn {

struct IndexBuildError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RangeError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// Carries the 0-based line number of the offending JSONL record.
struct ParseError : std::runtime_error {
    ParseError(std::string msg, std::uint64_t line)
        : std::runtime_error(std::move(msg)), line_number(line) {}
    std::uint64_t line_number;
};

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct FrameTooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FrameTruncated : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RetrievalUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct TokenRangeError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

struct EmptyTargetError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NonFiniteGradError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CacheError : std::logic_error {
    using std::logic_error::logic_error;
};

struct SnapshotError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DegenerateInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SummaryEmpty : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace tttnn
