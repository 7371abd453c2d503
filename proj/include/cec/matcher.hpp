#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "cec/dataset.hpp"
#include "cec/kdtree.hpp"

namespace cec {

constexpr int kUnmatched = -1;

// Training rows partitioned by (y, a), each cell with its standardized
// financial submatrix and an exact nearest-neighbor index over it.
struct PartitionIndex {
    struct Cell {
        std::vector<int> rows;  // global row ids
        std::shared_ptr<KdTree> tree;
        bool empty() const { return rows.empty(); }
    };
    std::array<std::array<Cell, 2>, 2> cells;  // [y][a]
    std::vector<std::string> warnings;

    const Cell& cell(int y, int a) const { return cells[y][a]; }
};

// Candidate pools always come from the training split; queries may cover any
// rows of the same dataset.
PartitionIndex build_index(const Dataset& train);

struct CounterfactualMap {
    std::vector<int> rows;         // queried rows, ascending
    std::vector<int> matched_row;  // global train row id or kUnmatched
    std::vector<double> dist;      // L2 over standardized F; 0 at unmatched slots
    double tau_dist = 0.0;
    double coverage = 0.0;         // matched fraction

    int size() const { return static_cast<int>(rows.size()); }
};

// Exact opposite-group, same-label nearest neighbor for each queried row.
// tau_dist > 0 rejects matches with distance above the threshold; 0 disables
// the check. Unmatched is a value, never an error.
CounterfactualMap match(const PartitionIndex& index, const Dataset& d, double tau_dist,
                        const std::vector<int>* query_rows = nullptr);

// Per-(y,a) mean of the model-input rows (features plus protected column).
struct BaselineSet {
    std::array<std::array<Vec64, 2>, 2> b;  // empty when the cell is empty

    bool has(int y, int a) const { return !b[y][a].empty(); }
    const Vec64& get(int y, int a) const;
};

BaselineSet compute_baselines(const Dataset& train);

// Materialized factual/counterfactual tuples in model-input space. Each tuple
// carries the factual's label-group baseline.
struct PairedDataset {
    Matrix x;    // pairs x model_dim
    Matrix xcf;
    Matrix baseline;
    std::vector<int> row_id, cf_id;
    std::vector<int> y, a;
    Vec64 dist;
    int n_unmatched = 0;

    int size() const { return x.rows; }
};

PairedDataset pair(const Dataset& d, const CounterfactualMap& map, const BaselineSet& baselines,
                   const std::vector<int>* restrict_rows = nullptr);

// --- stage artifacts ---

void save_map_csv(const CounterfactualMap& map, const std::string& path);
CounterfactualMap load_map_csv(const std::string& path);
void save_baselines_json(const BaselineSet& baselines, const std::string& path);
BaselineSet load_baselines_json(const std::string& path);

}  // namespace cec
