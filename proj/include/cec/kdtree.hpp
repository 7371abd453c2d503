#pragma once

#include <vector>

#include "cec/matrix.hpp"

namespace cec {

// Exact nearest-neighbor index over row points. Ties at equal squared
// distance resolve to the lowest id, matching the brute-force scan rule:
// update iff (d2 < best) or (d2 == best and id < best_id). Squared distances
// are accumulated dimension 0..k-1 in order on both paths, so the comparison
// is bitwise consistent with a linear scan.
class KdTree {
public:
    KdTree() = default;
    KdTree(Matrix points, std::vector<int> ids);

    struct Result {
        int id = -1;
        double dist2 = 0.0;
    };

    // id == -1 when the tree is empty. query must have dim() entries.
    Result nearest(const double* query) const;

    int size() const { return pts_.rows; }
    int dim() const { return pts_.cols; }

private:
    struct Node {
        int split_dim = -1;  // -1 marks a leaf
        double split_val = 0.0;
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf range into order_
    };

    int build(int begin, int end);
    void search(int node, const double* q, Result& best) const;
    double dist2_to(int idx, const double* q) const;

    Matrix pts_;
    std::vector<int> ids_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
    static constexpr int kLeafSize = 8;
};

}  // namespace cec
