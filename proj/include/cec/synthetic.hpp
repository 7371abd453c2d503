#pragma once

#include <optional>
#include <string>

#include "cec/dataset.hpp"

namespace cec {

// Benchmark generator: financial features independent of the protected
// attribute, proxies mean-shifted between groups, labels driven by financial
// features only.
struct SyntheticConfig {
    int n = 10000;
    int d_financial = 10;
    int d_proxy = 5;
    int d_noise = 5;
    double proxy_shift = 0.5;  // group mean separation in sigma units
    double noise_std = 0.5;    // label noise epsilon
    uint64_t seed = 1;
    double test_fraction = 0.2;
    std::optional<Vec64> label_weights;       // drawn per-seed when absent
    std::optional<double> label_threshold;    // empirical median when absent

    int dim() const { return d_financial + d_proxy + d_noise; }
    void validate() const;

    static SyntheticConfig from_json(const std::string& text);
    static SyntheticConfig from_json_file(const std::string& path);
    std::string to_json() const;
};

// Raw (unstandardized) dataset; split assignment and standardization are
// separate pipeline steps. eps_out receives the label noise draws so tests
// can re-derive labels exactly.
Dataset generate_synthetic(const SyntheticConfig& cfg, Vec64* eps_out = nullptr);

}  // namespace cec
