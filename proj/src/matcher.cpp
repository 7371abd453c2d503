#include "cec/matcher.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cec/csv.hpp"

namespace cec {

namespace {

std::vector<int> all_rows(const Dataset& d) {
    std::vector<int> rows(d.n());
    for (int i = 0; i < d.n(); ++i) rows[i] = i;
    return rows;
}

std::vector<int> training_rows(const Dataset& d) {
    return d.train_idx.empty() ? all_rows(d) : d.train_idx;
}

}  // namespace

PartitionIndex build_index(const Dataset& d) {
    if (!d.standardized)
        throw ContractError("build_index: standardization must be fit before indexing");
    const auto& fin = d.schema.financial_idx;
    PartitionIndex index;

    std::array<std::array<std::vector<int>, 2>, 2> members;
    for (int i : training_rows(d)) members[d.y[i]][d.a[i]].push_back(i);

    int nonempty = 0;
    for (int y = 0; y < 2; ++y) {
        for (int a = 0; a < 2; ++a) {
            auto& cell = index.cells[y][a];
            cell.rows = members[y][a];
            if (cell.rows.empty()) {
                index.warnings.push_back("cell (y=" + std::to_string(y) + ",a=" +
                                         std::to_string(a) +
                                         ") is empty; its queries return UNMATCHED");
                continue;
            }
            ++nonempty;
            Matrix sub(static_cast<int>(cell.rows.size()), static_cast<int>(fin.size()));
            for (size_t r = 0; r < cell.rows.size(); ++r) {
                for (size_t j = 0; j < fin.size(); ++j) {
                    sub.at(static_cast<int>(r), static_cast<int>(j)) = d.X.at(cell.rows[r], fin[j]);
                }
            }
            cell.tree = std::make_shared<KdTree>(std::move(sub), cell.rows);
        }
    }
    if (nonempty == 0) throw ContractError("build_index: all four (y,a) cells are empty");
    return index;
}

CounterfactualMap match(const PartitionIndex& index, const Dataset& d, double tau_dist,
                        const std::vector<int>* query_rows) {
    if (tau_dist < 0.0) throw ConfigError("match: tau_dist must be >= 0 (0 disables)");
    const auto& fin = d.schema.financial_idx;
    CounterfactualMap map;
    map.tau_dist = tau_dist;
    map.rows = query_rows ? *query_rows : all_rows(d);
    map.matched_row.assign(map.rows.size(), kUnmatched);
    map.dist.assign(map.rows.size(), 0.0);

    Vec64 q(fin.size());
    int matched = 0;
    for (size_t k = 0; k < map.rows.size(); ++k) {
        const int i = map.rows[k];
        const auto& cell = index.cell(d.y[i], 1 - d.a[i]);
        if (cell.empty()) continue;
        for (size_t j = 0; j < fin.size(); ++j) q[j] = d.X.at(i, fin[j]);
        const KdTree::Result r = cell.tree->nearest(q.data());
        const double dist = std::sqrt(r.dist2);
        if (tau_dist > 0.0 && dist > tau_dist) continue;  // poor-quality match
        map.matched_row[k] = r.id;
        map.dist[k] = dist;
        ++matched;
    }
    map.coverage = map.rows.empty() ? 0.0 : static_cast<double>(matched) / map.rows.size();
    return map;
}

const Vec64& BaselineSet::get(int y, int a) const {
    if (!has(y, a)) {
        throw ContractError("baseline b_{" + std::to_string(y) + "," + std::to_string(a) +
                            "} is absent (empty label-group cell)");
    }
    return b[y][a];
}

BaselineSet compute_baselines(const Dataset& d) {
    BaselineSet set;
    std::array<std::array<std::vector<int>, 2>, 2> members;
    for (int i : training_rows(d)) members[d.y[i]][d.a[i]].push_back(i);
    for (int y = 0; y < 2; ++y) {
        for (int a = 0; a < 2; ++a) {
            const auto& rows = members[y][a];
            if (rows.empty()) continue;
            Vec64 mean(d.model_dim(), 0.0);
            for (int i : rows) {
                const double* src = d.X.row_ptr(i);
                for (int j = 0; j < d.dim(); ++j) mean[j] += src[j];
                mean[d.dim()] += static_cast<double>(d.a[i]);
            }
            for (auto& v : mean) v /= static_cast<double>(rows.size());
            set.b[y][a] = std::move(mean);
        }
    }
    return set;
}

PairedDataset pair(const Dataset& d, const CounterfactualMap& map, const BaselineSet& baselines,
                   const std::vector<int>* restrict_rows) {
    std::vector<char> keep;
    if (restrict_rows) {
        keep.assign(d.n(), 0);
        for (int i : *restrict_rows) keep[i] = 1;
    }

    std::vector<int> take;  // indices into map
    int unmatched = 0;
    for (int k = 0; k < map.size(); ++k) {
        if (restrict_rows && !keep[map.rows[k]]) continue;
        if (map.matched_row[k] == kUnmatched) {
            ++unmatched;
            continue;
        }
        take.push_back(k);
    }

    PairedDataset p;
    p.n_unmatched = unmatched;
    const int m = static_cast<int>(take.size());
    const int md = d.model_dim();
    p.x = Matrix(m, md);
    p.xcf = Matrix(m, md);
    p.baseline = Matrix(m, md);
    p.dist.resize(m);
    p.row_id.resize(m);
    p.cf_id.resize(m);
    p.y.resize(m);
    p.a.resize(m);
    for (int t = 0; t < m; ++t) {
        const int k = take[t];
        const int i = map.rows[k];
        const int j = map.matched_row[k];
        const Vec64 xi = d.model_input_row(i);
        const Vec64 xj = d.model_input_row(j);
        const Vec64& b = baselines.get(d.y[i], d.a[i]);  // the factual's cell
        for (int c = 0; c < md; ++c) {
            p.x.at(t, c) = xi[c];
            p.xcf.at(t, c) = xj[c];
            p.baseline.at(t, c) = b[c];
        }
        p.row_id[t] = i;
        p.cf_id[t] = j;
        p.y[t] = d.y[i];
        p.a[t] = d.a[i];
        p.dist[t] = map.dist[k];
    }
    return p;
}

void save_map_csv(const CounterfactualMap& map, const std::string& path) {
    std::vector<std::vector<std::string>> rows(map.size());
    for (int k = 0; k < map.size(); ++k) {
        auto& row = rows[k];
        row.push_back(std::to_string(map.rows[k]));
        row.push_back(map.matched_row[k] == kUnmatched ? "UNMATCHED"
                                                       : std::to_string(map.matched_row[k]));
        row.push_back(csv::format_double(map.dist[k]));
    }
    csv::write_file(path, {"row_id", "matched_row_id", "distance"}, rows);
}

CounterfactualMap load_map_csv(const std::string& path) {
    const csv::Table t = csv::read_file(path);
    if (t.header != std::vector<std::string>{"row_id", "matched_row_id", "distance"})
        throw IngestError("unexpected header in counterfactual map csv: " + path);
    CounterfactualMap map;
    int matched = 0;
    for (const auto& row : t.rows) {
        map.rows.push_back(std::stoi(row[0]));
        if (row[1] == "UNMATCHED") {
            map.matched_row.push_back(kUnmatched);
            map.dist.push_back(0.0);
        } else {
            map.matched_row.push_back(std::stoi(row[1]));
            map.dist.push_back(std::stod(row[2]));
            ++matched;
        }
    }
    map.coverage = map.rows.empty() ? 0.0 : static_cast<double>(matched) / map.rows.size();
    return map;
}

void save_baselines_json(const BaselineSet& baselines, const std::string& path) {
    nlohmann::ordered_json j;
    for (int y = 0; y < 2; ++y) {
        for (int a = 0; a < 2; ++a) {
            if (!baselines.has(y, a)) continue;
            j[std::to_string(y) + "," + std::to_string(a)] = baselines.b[y][a];
        }
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write baselines: " + path);
    out << j.dump(2) << "\n";
}

BaselineSet load_baselines_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read baselines: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    BaselineSet set;
    for (int y = 0; y < 2; ++y) {
        for (int a = 0; a < 2; ++a) {
            const std::string key = std::to_string(y) + "," + std::to_string(a);
            if (j.contains(key)) set.b[y][a] = j.at(key).get<Vec64>();
        }
    }
    return set;
}

}  // namespace cec
