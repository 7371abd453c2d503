#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cec/matrix.hpp"

namespace cec {

using NodeId = int32_t;
constexpr NodeId kNoNode = -1;

enum class Op : uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale,          // c * A, c a compile-time-constant double
    SMul,           // s * A, s a 1x1 node
    MatMulNN,       // A(r,k) B(k,c)
    MatMulNT,       // A(r,k) B(c,k)^T
    MatMulTN,       // A(k,r)^T B(k,c)
    AddRowVec,      // A(r,c) + broadcast v(1,c)
    SumRows,        // (r,c) -> (1,c)
    BroadcastRows,  // (1,c) -> (r,c)
    RowSums,        // (r,c) -> (r,1)
    BroadcastCols,  // (r,1) -> (r,c)
    SumAll,         // (r,c) -> (1,1)
    DotAll,         // sum(A .* B) -> (1,1)
    BlockSumRows,   // (B*T,c) -> (B,c), sum over blocks of T consecutive rows
    BlockExpandRows,// (B,c) -> (B*T,c), repeat each row T times
    RowPairDiff,    // (2m,c) -> (m,c), even row minus following odd row
    RowPairExpand,  // (m,c) -> (2m,c), +row at 2i, -row at 2i+1
    Tanh,
    Sigmoid,
    Relu,
    Exp,
    Log,
    Sqrt,
    BceLogits,      // per-row stable binary cross-entropy from logits; b holds targets
};

// Append-only record of primitive operations. Values are evaluated eagerly;
// topological order is append order. The backward sweep emits its adjoint
// arithmetic as ordinary nodes on the same tape, so the output of gradient()
// is itself differentiable (closure under re-taping) -- one more gradient()
// call yields mixed second-order derivatives.
class Tape {
public:
    struct Node {
        Op op;
        NodeId a = kNoNode;
        NodeId b = kNoNode;
        int iparam = 0;      // rows/cols/block for broadcast-style ops
        double cparam = 0.0; // factor for Scale
        bool rq = false;     // depends on a grad-requiring leaf
        Matrix val;
    };

    NodeId leaf(Matrix m, bool requires_grad);
    NodeId constant(Matrix m) { return leaf(std::move(m), false); }
    NodeId scalar_constant(double v) { return constant(Matrix::full(1, 1, v)); }
    NodeId ones(int r, int c) { return constant(Matrix::full(r, c, 1.0)); }

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId neg(NodeId a);
    NodeId scale(NodeId a, double c);
    NodeId smul(NodeId s, NodeId a);
    NodeId matmul(NodeId a, NodeId b);
    NodeId matmul_nt(NodeId a, NodeId b);
    NodeId matmul_tn(NodeId a, NodeId b);
    NodeId add_rowvec(NodeId a, NodeId v);
    NodeId sum_rows(NodeId a);
    NodeId broadcast_rows(NodeId v, int rows);
    NodeId row_sums(NodeId a);
    NodeId broadcast_cols(NodeId v, int cols);
    NodeId sum_all(NodeId a);
    NodeId dot_all(NodeId a, NodeId b);
    NodeId block_sum_rows(NodeId a, int block);
    NodeId block_mean_rows(NodeId a, int block) {
        return scale(block_sum_rows(a, block), 1.0 / block);
    }
    NodeId block_expand_rows(NodeId a, int block);
    NodeId row_pair_diff(NodeId a);
    NodeId row_pair_expand(NodeId a);
    NodeId tanh(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId relu(NodeId a);
    NodeId exp(NodeId a);
    NodeId log(NodeId a);
    NodeId sqrt(NodeId a);
    NodeId bce_logits(NodeId logits, NodeId targets);

    // Reverse sweep from a scalar node. Returns one adjoint node per entry of
    // `wrt` (a zero constant when `out` does not depend on it). Each node in
    // [0, out] is visited exactly once.
    std::vector<NodeId> gradient(NodeId out, std::span<const NodeId> wrt);

    const Matrix& value(NodeId id) const { return nodes_[id].val; }
    double scalar_value(NodeId id) const { return nodes_[id].val.scalar(); }
    bool requires_grad(NodeId id) const { return nodes_[id].rq; }
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }
    void reserve(size_t n) { nodes_.reserve(n); }

private:
    NodeId push(Node n);
    const Node& node(NodeId id) const { return nodes_[id]; }

    std::vector<Node> nodes_;
};

}  // namespace cec
