#include "cec/kdtree.hpp"

#include <algorithm>
#include <limits>

namespace cec {

KdTree::KdTree(Matrix points, std::vector<int> ids)
    : pts_(std::move(points)), ids_(std::move(ids)) {
    if (static_cast<int>(ids_.size()) != pts_.rows)
        throw ContractError("KdTree: ids/points size mismatch");
    order_.resize(pts_.rows);
    for (int i = 0; i < pts_.rows; ++i) order_[i] = i;
    if (pts_.rows > 0) root_ = build(0, pts_.rows);
}

int KdTree::build(int begin, int end) {
    Node node;
    node.begin = begin;
    node.end = end;
    if (end - begin <= kLeafSize) {
        nodes_.push_back(node);
        return static_cast<int>(nodes_.size() - 1);
    }

    // Split on the dimension with the largest spread (lowest index on ties).
    int dim = 0;
    double best_spread = -1.0;
    for (int j = 0; j < pts_.cols; ++j) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int i = begin; i < end; ++i) {
            const double v = pts_.at(order_[i], j);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi - lo > best_spread) {
            best_spread = hi - lo;
            dim = j;
        }
    }
    if (best_spread == 0.0) {
        // All points identical on every dimension with spread; keep as leaf.
        nodes_.push_back(node);
        return static_cast<int>(nodes_.size() - 1);
    }

    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int lhs, int rhs) {
                         const double lv = pts_.at(lhs, dim), rv = pts_.at(rhs, dim);
                         if (lv != rv) return lv < rv;
                         return ids_[lhs] < ids_[rhs];
                     });
    node.split_dim = dim;
    node.split_val = pts_.at(order_[mid], dim);

    nodes_.push_back(node);
    const int self = static_cast<int>(nodes_.size() - 1);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
}

double KdTree::dist2_to(int idx, const double* q) const {
    const double* p = pts_.row_ptr(idx);
    double s = 0.0;
    for (int j = 0; j < pts_.cols; ++j) {
        const double diff = q[j] - p[j];
        s += diff * diff;
    }
    return s;
}

void KdTree::search(int node_id, const double* q, Result& best) const {
    const Node& node = nodes_[node_id];
    if (node.split_dim < 0) {
        for (int i = node.begin; i < node.end; ++i) {
            const int idx = order_[i];
            const double d2 = dist2_to(idx, q);
            if (d2 < best.dist2 || (d2 == best.dist2 && ids_[idx] < best.id)) {
                best.dist2 = d2;
                best.id = ids_[idx];
            }
        }
        return;
    }
    const double diff = q[node.split_dim] - node.split_val;
    const int near = diff <= 0.0 ? node.left : node.right;
    const int far = diff <= 0.0 ? node.right : node.left;
    search(near, q, best);
    // Prune only when strictly worse so equal-distance ties stay reachable.
    if (diff * diff <= best.dist2) search(far, q, best);
}

KdTree::Result KdTree::nearest(const double* query) const {
    Result best;
    best.id = -1;
    best.dist2 = std::numeric_limits<double>::infinity();
    if (root_ >= 0) search(root_, query, best);
    return best;
}

}  // namespace cec
