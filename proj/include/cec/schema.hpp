#pragma once

#include <map>
#include <string>
#include <vector>

#include "cec/common.hpp"

namespace cec {

// Column roles as declared by the user. Financial columns form the matching
// set F; proxy_excluded columns stay in the model input but never enter the
// matching distance; "other" columns are plain features.
enum class ColumnRole { Financial, ProxyExcluded, Protected, Label, Other };

ColumnRole role_from_string(const std::string& s);
std::string to_string(ColumnRole r);

struct ColumnSpec {
    std::string name;
    ColumnRole role = ColumnRole::Other;
    bool categorical = false;
    std::vector<std::string> levels;                // optional; observed when empty
    std::map<std::string, int> binary_mapping;      // protected/label value mapping
};

// Declarative ingestion config: one entry per CSV column.
struct SchemaConfig {
    std::vector<ColumnSpec> columns;

    static SchemaConfig from_json(const std::string& text);
    static SchemaConfig from_json_file(const std::string& path);
};

// Feature roles after one-hot expansion. financial_idx / excluded_proxies
// index the expanded feature columns; protected_col / label_col index the
// source table.
struct FeatureSchema {
    std::vector<std::string> feature_names;
    std::vector<int> financial_idx;
    std::vector<int> excluded_proxies;
    int protected_col = -1;
    int label_col = -1;
    std::string protected_name = "a";
    std::string label_name = "y";

    int dim() const { return static_cast<int>(feature_names.size()); }
    void validate() const;
};

}  // namespace cec
