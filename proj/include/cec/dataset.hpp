#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cec/matrix.hpp"
#include "cec/schema.hpp"

namespace cec {

// Extra generator bookkeeping carried by synthetic datasets (and persisted in
// the sidecar so labels can be re-derived).
struct SyntheticProvenance {
    uint64_t seed = 0;
    Vec64 label_weights;
    double label_threshold = 0.0;
    double proxy_shift = 0.0;
    double noise_std = 0.0;
    int d_financial = 0, d_proxy = 0, d_noise = 0;
};

// Immutable after construction. X holds the model-input features (post
// standardization when `standardized` is set); the protected attribute is
// appended as the final model-input coordinate by model_inputs().
struct Dataset {
    Matrix X;
    std::vector<int> y;
    std::vector<int> a;
    FeatureSchema schema;

    bool standardized = false;
    Vec64 mu, sigma;  // original-scale fit statistics, one per feature column

    std::vector<int> train_idx, test_idx;

    std::optional<SyntheticProvenance> synthetic;

    int n() const { return X.rows; }
    int dim() const { return X.cols; }
    int model_dim() const { return X.cols + 1; }

    Vec64 model_input_row(int i) const;
    Matrix model_inputs(const std::vector<int>& rows) const;

    bool has_split() const { return !train_idx.empty() || !test_idx.empty(); }
    void validate() const;
};

// CSV ingestion with one-hot expansion per the declared schema. Errors name
// the offending row/column.
Dataset load_csv(const std::string& csv_path, const SchemaConfig& config);

// Z-scores every feature column with mean/stddev fit on fit_split only
// (population stddev). Zero variance on the fit split is an error.
Dataset standardize(const Dataset& d, const std::vector<int>& fit_split);

// Deterministic shuffled split; both halves returned sorted ascending.
std::pair<std::vector<int>, std::vector<int>> make_split(int n, double test_fraction,
                                                         uint64_t seed);

// Canonical on-disk form: dataset.csv (features + y + a, 17 significant
// digits) plus a meta.json sidecar (schema, split, standardization, synthetic
// provenance).
void save_dataset(const Dataset& d, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace cec
