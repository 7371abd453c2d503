#include "cec/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cec/csv.hpp"
#include "cec/rng.hpp"

namespace cec {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

Vec64 Dataset::model_input_row(int i) const {
    Vec64 v(X.row_ptr(i), X.row_ptr(i) + X.cols);
    v.push_back(static_cast<double>(a[i]));
    return v;
}

Matrix Dataset::model_inputs(const std::vector<int>& rows) const {
    Matrix M(static_cast<int>(rows.size()), model_dim());
    for (size_t r = 0; r < rows.size(); ++r) {
        const int i = rows[r];
        double* out = M.row_ptr(static_cast<int>(r));
        const double* src = X.row_ptr(i);
        for (int j = 0; j < X.cols; ++j) out[j] = src[j];
        out[X.cols] = static_cast<double>(a[i]);
    }
    return M;
}

void Dataset::validate() const {
    if (static_cast<int>(y.size()) != n() || static_cast<int>(a.size()) != n())
        throw SchemaError("dataset: label/attribute length mismatch");
    for (int v : y)
        if (v != 0 && v != 1) throw SchemaError("dataset: labels must be binary");
    for (int v : a)
        if (v != 0 && v != 1) throw SchemaError("dataset: protected attribute must be binary");
    require_finite(X.a, "dataset features");
    schema.validate();
    if (schema.dim() != dim()) throw SchemaError("dataset: schema/feature count mismatch");
    if (has_split()) {
        std::set<int> seen;
        for (int i : train_idx) {
            if (i < 0 || i >= n() || !seen.insert(i).second)
                throw SchemaError("dataset: bad train split index");
        }
        for (int i : test_idx) {
            if (i < 0 || i >= n() || !seen.insert(i).second)
                throw SchemaError("dataset: train/test split indices must be disjoint");
        }
    }
}

namespace {

double parse_cell(const std::string& cell, size_t row, const std::string& col) {
    if (cell.empty()) {
        throw IngestError("row " + std::to_string(row) + ", column '" + col +
                          "': missing value (imputation is not supported)");
    }
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v)) {
        throw IngestError("row " + std::to_string(row) + ", column '" + col +
                          "': unparseable numeric cell '" + cell + "'");
    }
    return v;
}

int parse_binary(const std::string& cell, const ColumnSpec& spec, size_t row) {
    if (!spec.binary_mapping.empty()) {
        auto it = spec.binary_mapping.find(cell);
        if (it == spec.binary_mapping.end()) {
            throw IngestError("row " + std::to_string(row) + ", column '" + spec.name +
                              "': value '" + cell + "' not in declared mapping");
        }
        if (it->second != 0 && it->second != 1)
            throw IngestError("column '" + spec.name + "': mapping must target 0/1");
        return it->second;
    }
    const double v = parse_cell(cell, row, spec.name);
    if (v != 0.0 && v != 1.0) {
        throw IngestError("row " + std::to_string(row) + ", column '" + spec.name +
                          "': expected binary value, got '" + cell + "'");
    }
    return static_cast<int>(v);
}

}  // namespace

Dataset load_csv(const std::string& csv_path, const SchemaConfig& config) {
    const csv::Table table = csv::read_file(csv_path);

    // Resolve declared columns against the header; reject unknowns both ways.
    std::vector<int> col_of(config.columns.size(), -1);
    std::set<std::string> declared;
    const ColumnSpec* protected_spec = nullptr;
    const ColumnSpec* label_spec = nullptr;
    int protected_src = -1, label_src = -1;
    for (size_t k = 0; k < config.columns.size(); ++k) {
        const auto& spec = config.columns[k];
        if (!declared.insert(spec.name).second)
            throw ConfigError("schema config: column '" + spec.name + "' declared twice");
        col_of[k] = table.col_index(spec.name);
        if (col_of[k] < 0) throw IngestError("declared column '" + spec.name + "' not found in csv");
        if (spec.role == ColumnRole::Protected) {
            if (protected_spec) throw ConfigError("schema config: multiple protected columns");
            protected_spec = &spec;
            protected_src = col_of[k];
        } else if (spec.role == ColumnRole::Label) {
            if (label_spec) throw ConfigError("schema config: multiple label columns");
            label_spec = &spec;
            label_src = col_of[k];
        }
    }
    if (!protected_spec) throw ConfigError("schema config: no protected column declared");
    if (!label_spec) throw ConfigError("schema config: no label column declared");
    for (const auto& name : table.header) {
        if (!declared.count(name))
            throw IngestError("csv column '" + name + "' is not declared in the schema config");
    }
    if (table.rows.empty()) throw IngestError("csv has a header but no data rows");

    const size_t nrows = table.rows.size();
    Dataset d;
    d.schema.protected_col = protected_src;
    d.schema.label_col = label_src;
    d.schema.protected_name = protected_spec->name;
    d.schema.label_name = label_spec->name;

    // Expand feature columns in declaration order.
    std::vector<Vec64> columns;  // one per expanded feature column
    for (size_t k = 0; k < config.columns.size(); ++k) {
        const auto& spec = config.columns[k];
        if (spec.role == ColumnRole::Protected || spec.role == ColumnRole::Label) continue;
        const int src = col_of[k];
        std::vector<int> expanded_idx;
        if (spec.categorical) {
            std::vector<std::string> levels = spec.levels;
            if (levels.empty()) {
                std::set<std::string> seen;
                for (const auto& row : table.rows) seen.insert(row[src]);
                levels.assign(seen.begin(), seen.end());
            }
            std::map<std::string, size_t> level_of;
            for (size_t l = 0; l < levels.size(); ++l) level_of[levels[l]] = l;
            std::vector<Vec64> onehot(levels.size(), Vec64(nrows, 0.0));
            for (size_t r = 0; r < nrows; ++r) {
                const std::string& cell = table.rows[r][src];
                auto it = level_of.find(cell);
                if (it == level_of.end()) {
                    throw IngestError("row " + std::to_string(r + 2) + ", column '" + spec.name +
                                      "': level '" + cell + "' not in declared levels");
                }
                onehot[it->second][r] = 1.0;
            }
            for (size_t l = 0; l < levels.size(); ++l) {
                expanded_idx.push_back(static_cast<int>(columns.size()));
                d.schema.feature_names.push_back(spec.name + "=" + levels[l]);
                columns.push_back(std::move(onehot[l]));
            }
        } else {
            Vec64 col(nrows);
            for (size_t r = 0; r < nrows; ++r) {
                col[r] = parse_cell(table.rows[r][src], r + 2, spec.name);
            }
            expanded_idx.push_back(static_cast<int>(columns.size()));
            d.schema.feature_names.push_back(spec.name);
            columns.push_back(std::move(col));
        }
        for (int idx : expanded_idx) {
            if (spec.role == ColumnRole::Financial) d.schema.financial_idx.push_back(idx);
            if (spec.role == ColumnRole::ProxyExcluded) d.schema.excluded_proxies.push_back(idx);
        }
    }

    // Constant feature columns can never be standardized (sigma = 0).
    for (size_t c = 0; c < columns.size(); ++c) {
        const double first = columns[c][0];
        bool constant = true;
        for (double v : columns[c]) {
            if (v != first) {
                constant = false;
                break;
            }
        }
        if (constant) {
            throw IngestError("column '" + d.schema.feature_names[c] +
                              "' is constant (sigma = 0); drop it or fix the data");
        }
    }

    d.X = Matrix(static_cast<int>(nrows), static_cast<int>(columns.size()));
    for (size_t r = 0; r < nrows; ++r) {
        for (size_t c = 0; c < columns.size(); ++c) d.X.at(static_cast<int>(r), static_cast<int>(c)) = columns[c][r];
    }
    d.y.resize(nrows);
    d.a.resize(nrows);
    for (size_t r = 0; r < nrows; ++r) {
        d.y[r] = parse_binary(table.rows[r][label_src], *label_spec, r + 2);
        d.a[r] = parse_binary(table.rows[r][protected_src], *protected_spec, r + 2);
    }
    d.validate();
    return d;
}

Dataset standardize(const Dataset& d, const std::vector<int>& fit_split) {
    if (fit_split.empty()) throw ConfigError("standardize: fit split is empty");
    for (int i : fit_split) {
        if (i < 0 || i >= d.n()) throw ContractError("standardize: fit index out of range");
    }
    Dataset out = d;
    out.mu.assign(d.dim(), 0.0);
    out.sigma.assign(d.dim(), 0.0);
    const double m = static_cast<double>(fit_split.size());
    for (int j = 0; j < d.dim(); ++j) {
        double mean = 0.0;
        for (int i : fit_split) mean += d.X.at(i, j);
        mean /= m;
        double var = 0.0;
        for (int i : fit_split) {
            const double dev = d.X.at(i, j) - mean;
            var += dev * dev;
        }
        var /= m;
        if (var == 0.0) {
            throw IngestError("standardize: column '" + d.schema.feature_names[j] +
                              "' has zero variance on the fit split");
        }
        out.mu[j] = mean;
        out.sigma[j] = std::sqrt(var);
    }
    for (int i = 0; i < d.n(); ++i) {
        for (int j = 0; j < d.dim(); ++j) {
            out.X.at(i, j) = (d.X.at(i, j) - out.mu[j]) / out.sigma[j];
        }
    }
    out.standardized = true;
    return out;
}

std::pair<std::vector<int>, std::vector<int>> make_split(int n, double test_fraction,
                                                         uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw ConfigError("test_fraction must be in [0, 1)");
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(idx);
    const int n_test = static_cast<int>(std::floor(n * test_fraction));
    std::vector<int> test(idx.begin(), idx.begin() + n_test);
    std::vector<int> train(idx.begin() + n_test, idx.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

void save_dataset(const Dataset& d, const std::string& dir) {
    fs::create_directories(dir);

    std::vector<std::string> header = d.schema.feature_names;
    header.push_back(d.schema.label_name);
    header.push_back(d.schema.protected_name);
    std::vector<std::vector<std::string>> rows(d.n());
    for (int i = 0; i < d.n(); ++i) {
        auto& row = rows[i];
        row.reserve(d.dim() + 2);
        for (int j = 0; j < d.dim(); ++j) row.push_back(csv::format_double(d.X.at(i, j)));
        row.push_back(std::to_string(d.y[i]));
        row.push_back(std::to_string(d.a[i]));
    }
    csv::write_file((fs::path(dir) / "dataset.csv").string(), header, rows);

    ordered_json meta;
    meta["format"] = 1;
    meta["n"] = d.n();
    meta["feature_names"] = d.schema.feature_names;
    meta["financial_idx"] = d.schema.financial_idx;
    meta["excluded_proxies"] = d.schema.excluded_proxies;
    meta["label_name"] = d.schema.label_name;
    meta["protected_name"] = d.schema.protected_name;
    meta["standardized"] = d.standardized;
    meta["mu"] = d.mu;
    meta["sigma"] = d.sigma;
    meta["train_idx"] = d.train_idx;
    meta["test_idx"] = d.test_idx;
    if (d.synthetic) {
        ordered_json s;
        s["seed"] = d.synthetic->seed;
        s["label_weights"] = d.synthetic->label_weights;
        s["label_threshold"] = d.synthetic->label_threshold;
        s["proxy_shift"] = d.synthetic->proxy_shift;
        s["noise_std"] = d.synthetic->noise_std;
        s["d_financial"] = d.synthetic->d_financial;
        s["d_proxy"] = d.synthetic->d_proxy;
        s["d_noise"] = d.synthetic->d_noise;
        meta["synthetic"] = std::move(s);
    }
    std::ofstream out(fs::path(dir) / "meta.json");
    if (!out) throw ConfigError("cannot write dataset meta: " + dir);
    out << meta.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "meta.json");
    if (!in) throw ConfigError("cannot read dataset meta in: " + dir);
    ordered_json meta = ordered_json::parse(in);

    Dataset d;
    d.schema.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
    d.schema.financial_idx = meta.at("financial_idx").get<std::vector<int>>();
    d.schema.excluded_proxies = meta.at("excluded_proxies").get<std::vector<int>>();
    d.schema.label_name = meta.at("label_name").get<std::string>();
    d.schema.protected_name = meta.at("protected_name").get<std::string>();
    d.standardized = meta.at("standardized").get<bool>();
    d.mu = meta.at("mu").get<Vec64>();
    d.sigma = meta.at("sigma").get<Vec64>();
    d.train_idx = meta.at("train_idx").get<std::vector<int>>();
    d.test_idx = meta.at("test_idx").get<std::vector<int>>();
    if (meta.contains("synthetic")) {
        const auto& s = meta.at("synthetic");
        SyntheticProvenance p;
        p.seed = s.at("seed").get<uint64_t>();
        p.label_weights = s.at("label_weights").get<Vec64>();
        p.label_threshold = s.at("label_threshold").get<double>();
        p.proxy_shift = s.at("proxy_shift").get<double>();
        p.noise_std = s.at("noise_std").get<double>();
        p.d_financial = s.at("d_financial").get<int>();
        p.d_proxy = s.at("d_proxy").get<int>();
        p.d_noise = s.at("d_noise").get<int>();
        d.synthetic = std::move(p);
    }

    const csv::Table table = csv::read_file((fs::path(dir) / "dataset.csv").string());
    const int dim = d.schema.dim();
    if (static_cast<int>(table.header.size()) != dim + 2)
        throw IngestError("dataset.csv column count does not match meta.json");
    const size_t nrows = table.rows.size();
    d.X = Matrix(static_cast<int>(nrows), dim);
    d.y.resize(nrows);
    d.a.resize(nrows);
    for (size_t r = 0; r < nrows; ++r) {
        for (int j = 0; j < dim; ++j) {
            d.X.at(static_cast<int>(r), j) = parse_cell(table.rows[r][j], r + 2, table.header[j]);
        }
        d.y[r] = static_cast<int>(parse_cell(table.rows[r][dim], r + 2, "y"));
        d.a[r] = static_cast<int>(parse_cell(table.rows[r][dim + 1], r + 2, "a"));
    }
    d.validate();
    return d;
}

}  // namespace cec
