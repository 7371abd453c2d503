#include "cec/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cec {

ColumnRole role_from_string(const std::string& s) {
    if (s == "financial") return ColumnRole::Financial;
    if (s == "proxy_excluded") return ColumnRole::ProxyExcluded;
    if (s == "protected") return ColumnRole::Protected;
    if (s == "label") return ColumnRole::Label;
    if (s == "other") return ColumnRole::Other;
    throw ConfigError("unknown column role: " + s);
}

std::string to_string(ColumnRole r) {
    switch (r) {
        case ColumnRole::Financial: return "financial";
        case ColumnRole::ProxyExcluded: return "proxy_excluded";
        case ColumnRole::Protected: return "protected";
        case ColumnRole::Label: return "label";
        case ColumnRole::Other: return "other";
    }
    return "?";
}

SchemaConfig SchemaConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    SchemaConfig cfg;
    for (const auto& col : j.at("columns")) {
        ColumnSpec spec;
        spec.name = col.at("name").get<std::string>();
        spec.role = role_from_string(col.at("role").get<std::string>());
        spec.categorical = col.value("categorical", false);
        if (col.contains("levels")) spec.levels = col.at("levels").get<std::vector<std::string>>();
        if (col.contains("mapping")) {
            for (auto it = col.at("mapping").begin(); it != col.at("mapping").end(); ++it) {
                spec.binary_mapping[it.key()] = it.value().get<int>();
            }
        }
        cfg.columns.push_back(std::move(spec));
    }
    if (cfg.columns.empty()) throw ConfigError("schema config: no columns declared");
    return cfg;
}

SchemaConfig SchemaConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read schema config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

void FeatureSchema::validate() const {
    if (financial_idx.empty()) throw SchemaError("financial feature set F must be nonempty");
    std::set<int> fin(financial_idx.begin(), financial_idx.end());
    if (fin.size() != financial_idx.size()) throw SchemaError("duplicate financial indices");
    for (int i : financial_idx) {
        if (i < 0 || i >= dim()) throw SchemaError("financial index out of range");
    }
    for (int i : excluded_proxies) {
        if (i < 0 || i >= dim()) throw SchemaError("excluded proxy index out of range");
        if (fin.count(i)) throw SchemaError("column cannot be both financial and excluded proxy");
    }
}

}  // namespace cec
