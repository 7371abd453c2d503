#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cec {

// Row vector of 64-bit floats; the boundary type for inputs, baselines and
// attributions. Finiteness is enforced at public API boundaries.
using Vec64 = std::vector<double>;

// Validation / configuration problems (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

// Malformed input data: bad CSV cell, missing column, non-binary label...
struct IngestError : std::runtime_error {
    explicit IngestError(const std::string& m) : std::runtime_error(m) {}
};

// Dimension or role mismatches between schema and data/model.
struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& m) : std::runtime_error(m) {}
};

// API contract violations (non-scalar loss, baseline/pair mismatch, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& m) : std::runtime_error(m) {}
};

// Numeric divergence (CLI exit code 3).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};

inline bool all_finite(const Vec64& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

inline void require_finite(const Vec64& v, const char* what) {
    if (!all_finite(v)) throw ContractError(std::string(what) + ": non-finite entry");
}

}  // namespace cec
