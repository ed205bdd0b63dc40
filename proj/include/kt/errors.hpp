#pragma once

#include <stdexcept>
#include <string>

namespace kt {

// Error taxonomy mirrored by the CLI exit codes:
//   usage 2, data 3, divergence 4, internal check 5.

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatches between tensors; message names both shapes.
struct ShapeError : DataError {
    explicit ShapeError(const std::string& msg) : DataError(msg) {}
};

// Non-finite loss or gradient during training; message carries the location.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InternalError : std::logic_error {
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw InternalError(msg);
}

}  // namespace kt
