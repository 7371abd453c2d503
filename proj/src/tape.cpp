#include "cec/tape.hpp"

#include <cmath>

namespace cec {

namespace {

void check(bool ok, const char* msg) {
    if (!ok) throw ContractError(msg);
}

}  // namespace

NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Matrix m, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.rq = requires_grad;
    n.val = std::move(m);
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Matrix &A = nodes_[a].val, &B = nodes_[b].val;
    check(A.same_shape(B), "add: shape mismatch");
    Node n{Op::Add, a, b};
    n.rq = nodes_[a].rq || nodes_[b].rq;
    n.val = Matrix(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = A.a[i] + B.a[i];
    return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
    const Matrix &A = nodes_[a].val, &B = nodes_[b].val;
    check(A.same_shape(B), "sub: shape mismatch");
    Node n{Op::Sub, a, b};
    n.rq = nodes_[a].rq || nodes_[b].rq;
    n.val = Matrix(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = A.a[i] - B.a[i];
    return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
    const Matrix &A = nodes_[a].val, &B = nodes_[b].val;
    check(A.same_shape(B), "mul: shape mismatch");
    Node n{Op::Mul, a, b};
    n.rq = nodes_[a].rq || nodes_[b].rq;
    n.val = Matrix(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = A.a[i] * B.a[i];
    return push(std::move(n));
}

NodeId Tape::div(NodeId a, NodeId b) {
    const Matrix &A = nodes_[a].val, &B = nodes_[b].val;
    check(A.same_shape(B), "div: shape mismatch");
    Node n{Op::Div, a, b};
    n.rq = nodes_[a].rq || nodes_[b].rq;
    n.val = Matrix(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = A.a[i] / B.a[i];
    return push(std::move(n));
}

NodeId Tape::neg(NodeId a) {
    const Matrix& A = nodes_[a].val;
    Node n{Op::Neg, a};
    n.rq = nodes_[a].rq;
    n.val = Matrix(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = -A.a[i];
    return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
    const Matrix& A = nodes_[a].val;
    Node n{Op::Scale, a};
    n.cparam = c;
    n.rq = nodes_[a].rq;
    n.val = Matrix(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = c * A.a[i];
    return push(std::move(n));
}

NodeId Tape::smul(NodeId s, NodeId a) {
    const Matrix &S = nodes_[s].val, &A = nodes_[a].val;
    check(S.is_scalar(), "smul: scalar operand must be 1x1");
    Node n{Op::SMul, s, a};
    n.rq = nodes_[s].rq || nodes_[a].rq;
    n.val = Matrix(A.rows, A.cols);
    const double c = S.a[0];
    for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = c * A.a[i];
    return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    const Matrix &A = nodes_[a].val, &B = nodes_[b].val;
    check(A.cols == B.rows, "matmul: inner dim mismatch");
    Node n{Op::MatMulNN, a, b};
    n.rq = nodes_[a].rq || nodes_[b].rq;
    n.val = Matrix(A.rows, B.cols);
    kernels::gemm_nn(A, B, n.val);
    return push(std::move(n));
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
    const Matrix &A = nodes_[a].val, &B = nodes_[b].val;
    check(A.cols == B.cols, "matmul_nt: inner dim mismatch");
    Node n{Op::MatMulNT, a, b};
    n.rq = nodes_[a].rq || nodes_[b].rq;
    n.val = Matrix(A.rows, B.rows);
    kernels::gemm_nt(A, B, n.val);
    return push(std::move(n));
}

NodeId Tape::matmul_tn(NodeId a, NodeId b) {
    const Matrix &A = nodes_[a].val, &B = nodes_[b].val;
    check(A.rows == B.rows, "matmul_tn: inner dim mismatch");
    Node n{Op::MatMulTN, a, b};
    n.rq = nodes_[a].rq || nodes_[b].rq;
    n.val = Matrix(A.cols, B.cols);
    kernels::gemm_tn(A, B, n.val);
    return push(std::move(n));
}

NodeId Tape::add_rowvec(NodeId a, NodeId v) {
    const Matrix &A = nodes_[a].val, &V = nodes_[v].val;
    check(V.rows == 1 && V.cols == A.cols, "add_rowvec: vector shape mismatch");
    Node n{Op::AddRowVec, a, v};
    n.rq = nodes_[a].rq || nodes_[v].rq;
    n.val = Matrix(A.rows, A.cols);
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row_ptr(i);
        double* orow = n.val.row_ptr(i);
        for (int j = 0; j < A.cols; ++j) orow[j] = arow[j] + V.a[j];
    }
    return push(std::move(n));
}

NodeId Tape::sum_rows(NodeId a) {
    const Matrix& A = nodes_[a].val;
    Node n{Op::SumRows, a};
    n.rq = nodes_[a].rq;
    n.val = Matrix(1, A.cols);
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row_ptr(i);
        for (int j = 0; j < A.cols; ++j) n.val.a[j] += arow[j];
    }
    return push(std::move(n));
}

NodeId Tape::broadcast_rows(NodeId v, int rows) {
    const Matrix& V = nodes_[v].val;
    check(V.rows == 1, "broadcast_rows: operand must be a row vector");
    Node n{Op::BroadcastRows, v};
    n.iparam = rows;
    n.rq = nodes_[v].rq;
    n.val = Matrix(rows, V.cols);
    for (int i = 0; i < rows; ++i) {
        double* orow = n.val.row_ptr(i);
        for (int j = 0; j < V.cols; ++j) orow[j] = V.a[j];
    }
    return push(std::move(n));
}

NodeId Tape::row_sums(NodeId a) {
    const Matrix& A = nodes_[a].val;
    Node n{Op::RowSums, a};
    n.rq = nodes_[a].rq;
    n.val = Matrix(A.rows, 1);
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row_ptr(i);
        double s = 0.0;
        for (int j = 0; j < A.cols; ++j) s += arow[j];
        n.val.a[i] = s;
    }
    return push(std::move(n));
}

NodeId Tape::broadcast_cols(NodeId v, int cols) {
    const Matrix& V = nodes_[v].val;
    check(V.cols == 1, "broadcast_cols: operand must be a column vector");
    Node n{Op::BroadcastCols, v};
    n.iparam = cols;
    n.rq = nodes_[v].rq;
    n.val = Matrix(V.rows, cols);
    for (int i = 0; i < V.rows; ++i) {
        double* orow = n.val.row_ptr(i);
        for (int j = 0; j < cols; ++j) orow[j] = V.a[i];
    }
    return push(std::move(n));
}

NodeId Tape::sum_all(NodeId a) {
    const Matrix& A = nodes_[a].val;
    Node n{Op::SumAll, a};
    n.rq = nodes_[a].rq;
    double s = 0.0;
    for (double x : A.a) s += x;
    n.val = Matrix::full(1, 1, s);
    return push(std::move(n));
}

NodeId Tape::dot_all(NodeId a, NodeId b) {
    const Matrix &A = nodes_[a].val, &B = nodes_[b].val;
    check(A.same_shape(B), "dot_all: shape mismatch");
    Node n{Op::DotAll, a, b};
    n.rq = nodes_[a].rq || nodes_[b].rq;
    double s = 0.0;
    for (size_t i = 0; i < A.size(); ++i) s += A.a[i] * B.a[i];
    n.val = Matrix::full(1, 1, s);
    return push(std::move(n));
}

NodeId Tape::block_sum_rows(NodeId a, int block) {
    const Matrix& A = nodes_[a].val;
    check(block > 0 && A.rows % block == 0, "block_sum_rows: rows not divisible by block");
    Node n{Op::BlockSumRows, a};
    n.iparam = block;
    n.rq = nodes_[a].rq;
    const int nblocks = A.rows / block;
    n.val = Matrix(nblocks, A.cols);
    for (int bidx = 0; bidx < nblocks; ++bidx) {
        double* orow = n.val.row_ptr(bidx);
        for (int t = 0; t < block; ++t) {
            const double* arow = A.row_ptr(bidx * block + t);
            for (int j = 0; j < A.cols; ++j) orow[j] += arow[j];
        }
    }
    return push(std::move(n));
}

NodeId Tape::block_expand_rows(NodeId a, int block) {
    const Matrix& A = nodes_[a].val;
    check(block > 0, "block_expand_rows: block must be positive");
    Node n{Op::BlockExpandRows, a};
    n.iparam = block;
    n.rq = nodes_[a].rq;
    n.val = Matrix(A.rows * block, A.cols);
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row_ptr(i);
        for (int t = 0; t < block; ++t) {
            double* orow = n.val.row_ptr(i * block + t);
            for (int j = 0; j < A.cols; ++j) orow[j] = arow[j];
        }
    }
    return push(std::move(n));
}

NodeId Tape::row_pair_diff(NodeId a) {
    const Matrix& A = nodes_[a].val;
    check(A.rows % 2 == 0, "row_pair_diff: row count must be even");
    Node n{Op::RowPairDiff, a};
    n.rq = nodes_[a].rq;
    n.val = Matrix(A.rows / 2, A.cols);
    for (int i = 0; i < n.val.rows; ++i) {
        const double* even = A.row_ptr(2 * i);
        const double* odd = A.row_ptr(2 * i + 1);
        double* orow = n.val.row_ptr(i);
        for (int j = 0; j < A.cols; ++j) orow[j] = even[j] - odd[j];
    }
    return push(std::move(n));
}

NodeId Tape::row_pair_expand(NodeId a) {
    const Matrix& A = nodes_[a].val;
    Node n{Op::RowPairExpand, a};
    n.rq = nodes_[a].rq;
    n.val = Matrix(A.rows * 2, A.cols);
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row_ptr(i);
        double* even = n.val.row_ptr(2 * i);
        double* odd = n.val.row_ptr(2 * i + 1);
        for (int j = 0; j < A.cols; ++j) {
            even[j] = arow[j];
            odd[j] = -arow[j];
        }
    }
    return push(std::move(n));
}

NodeId Tape::tanh(NodeId a) {
    const Matrix& A = nodes_[a].val;
    Node n{Op::Tanh, a};
    n.rq = nodes_[a].rq;
    n.val = Matrix(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = std::tanh(A.a[i]);
    return push(std::move(n));
}

NodeId Tape::sigmoid(NodeId a) {
    const Matrix& A = nodes_[a].val;
    Node n{Op::Sigmoid, a};
    n.rq = nodes_[a].rq;
    n.val = Matrix(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) {
        const double z = A.a[i];
        n.val.a[i] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                              : std::exp(z) / (1.0 + std::exp(z));
    }
    return push(std::move(n));
}

NodeId Tape::relu(NodeId a) {
    const Matrix& A = nodes_[a].val;
    Node n{Op::Relu, a};
    n.rq = nodes_[a].rq;
    n.val = Matrix(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = A.a[i] > 0.0 ? A.a[i] : 0.0;
    return push(std::move(n));
}

NodeId Tape::exp(NodeId a) {
    const Matrix& A = nodes_[a].val;
    Node n{Op::Exp, a};
    n.rq = nodes_[a].rq;
    n.val = Matrix(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = std::exp(A.a[i]);
    return push(std::move(n));
}

NodeId Tape::log(NodeId a) {
    const Matrix& A = nodes_[a].val;
    Node n{Op::Log, a};
    n.rq = nodes_[a].rq;
    n.val = Matrix(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = std::log(A.a[i]);
    return push(std::move(n));
}

NodeId Tape::sqrt(NodeId a) {
    const Matrix& A = nodes_[a].val;
    Node n{Op::Sqrt, a};
    n.rq = nodes_[a].rq;
    n.val = Matrix(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) n.val.a[i] = std::sqrt(A.a[i]);
    return push(std::move(n));
}

NodeId Tape::bce_logits(NodeId logits, NodeId targets) {
    const Matrix &Z = nodes_[logits].val, &Y = nodes_[targets].val;
    check(Z.cols == 1 && Z.same_shape(Y), "bce_logits: expects matching column vectors");
    Node n{Op::BceLogits, logits, targets};
    n.rq = nodes_[logits].rq || nodes_[targets].rq;
    n.val = Matrix(Z.rows, 1);
    for (int i = 0; i < Z.rows; ++i) {
        const double z = Z.a[i], y = Y.a[i];
        // max(z,0) - z*y + log(1+exp(-|z|)) == -y log s(z) - (1-y) log(1-s(z))
        n.val.a[i] = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    return push(std::move(n));
}

std::vector<NodeId> Tape::gradient(NodeId out, std::span<const NodeId> wrt) {
    check(out >= 0 && out < static_cast<NodeId>(nodes_.size()), "gradient: bad node id");
    check(nodes_[out].val.is_scalar(), "gradient: output must be a scalar");

    // dep[i]: node i depends on at least one wrt node. Adjoints are only
    // propagated inside this cone, so e.g. an input-gradient sweep never pays
    // for parameter outer products.
    std::vector<char> dep(static_cast<size_t>(out) + 1, 0);
    for (NodeId w : wrt) {
        if (w >= 0 && w <= out) dep[w] = 1;
    }
    for (NodeId i = 0; i <= out; ++i) {
        const Node& n = nodes_[i];
        if (dep[i]) continue;
        if ((n.a != kNoNode && dep[n.a]) || (n.b != kNoNode && dep[n.b])) dep[i] = 1;
    }

    std::vector<NodeId> adj(static_cast<size_t>(out) + 1, kNoNode);
    auto accumulate = [&](NodeId target, NodeId contrib) {
        if (!dep[target]) return;
        adj[target] = adj[target] == kNoNode ? contrib : add(adj[target], contrib);
    };

    if (dep[out]) adj[out] = scalar_constant(1.0);

    for (NodeId i = out; i >= 0; --i) {
        const NodeId g = adj[i];
        if (g == kNoNode) continue;
        // Snapshot fields: emitting adjoint nodes may reallocate nodes_.
        const Op op = nodes_[i].op;
        const NodeId a = nodes_[i].a, b = nodes_[i].b;
        const int iparam = nodes_[i].iparam;
        const double cparam = nodes_[i].cparam;
        const bool need_a = a != kNoNode && dep[a];
        const bool need_b = b != kNoNode && dep[b];
        if (!need_a && !need_b) continue;

        switch (op) {
            case Op::Leaf:
                break;
            case Op::Add:
                if (need_a) accumulate(a, g);
                if (need_b) accumulate(b, g);
                break;
            case Op::Sub:
                if (need_a) accumulate(a, g);
                if (need_b) accumulate(b, neg(g));
                break;
            case Op::Mul:
                if (need_a) accumulate(a, mul(g, b));
                if (need_b) accumulate(b, mul(g, a));
                break;
            case Op::Div:
                if (need_a) accumulate(a, div(g, b));
                if (need_b) accumulate(b, neg(mul(g, div(i, b))));
                break;
            case Op::Neg:
                if (need_a) accumulate(a, neg(g));
                break;
            case Op::Scale:
                if (need_a) accumulate(a, scale(g, cparam));
                break;
            case Op::SMul:
                if (need_a) accumulate(a, dot_all(g, b));
                if (need_b) accumulate(b, smul(a, g));
                break;
            case Op::MatMulNN:
                if (need_a) accumulate(a, matmul_nt(g, b));
                if (need_b) accumulate(b, matmul_tn(a, g));
                break;
            case Op::MatMulNT:
                if (need_a) accumulate(a, matmul(g, b));
                if (need_b) accumulate(b, matmul_tn(g, a));
                break;
            case Op::MatMulTN:
                if (need_a) accumulate(a, matmul_nt(b, g));
                if (need_b) accumulate(b, matmul(a, g));
                break;
            case Op::AddRowVec:
                if (need_a) accumulate(a, g);
                if (need_b) accumulate(b, sum_rows(g));
                break;
            case Op::SumRows:
                if (need_a) accumulate(a, broadcast_rows(g, nodes_[a].val.rows));
                break;
            case Op::BroadcastRows:
                if (need_a) accumulate(a, sum_rows(g));
                break;
            case Op::RowSums:
                if (need_a) accumulate(a, broadcast_cols(g, nodes_[a].val.cols));
                break;
            case Op::BroadcastCols:
                if (need_a) accumulate(a, row_sums(g));
                break;
            case Op::SumAll: {
                if (need_a) {
                    const Matrix& A = nodes_[a].val;
                    accumulate(a, smul(g, ones(A.rows, A.cols)));
                }
                break;
            }
            case Op::DotAll:
                if (need_a) accumulate(a, smul(g, b));
                if (need_b) accumulate(b, smul(g, a));
                break;
            case Op::BlockSumRows:
                if (need_a) accumulate(a, block_expand_rows(g, iparam));
                break;
            case Op::BlockExpandRows:
                if (need_a) accumulate(a, block_sum_rows(g, iparam));
                break;
            case Op::RowPairDiff:
                if (need_a) accumulate(a, row_pair_expand(g));
                break;
            case Op::RowPairExpand:
                if (need_a) accumulate(a, row_pair_diff(g));
                break;
            case Op::Tanh: {
                if (need_a) {
                    const Matrix& V = nodes_[i].val;
                    NodeId one = ones(V.rows, V.cols);
                    accumulate(a, mul(g, sub(one, mul(i, i))));
                }
                break;
            }
            case Op::Sigmoid: {
                if (need_a) {
                    const Matrix& V = nodes_[i].val;
                    NodeId one = ones(V.rows, V.cols);
                    accumulate(a, mul(g, mul(i, sub(one, i))));
                }
                break;
            }
            case Op::Relu: {
                if (need_a) {
                    // 0/1 mask captured as a constant: second derivative is
                    // zero almost everywhere.
                    const Matrix& A = nodes_[a].val;
                    Matrix mask(A.rows, A.cols);
                    for (size_t k = 0; k < A.size(); ++k) mask.a[k] = A.a[k] > 0.0 ? 1.0 : 0.0;
                    accumulate(a, mul(g, constant(std::move(mask))));
                }
                break;
            }
            case Op::Exp:
                if (need_a) accumulate(a, mul(g, i));
                break;
            case Op::Log:
                if (need_a) accumulate(a, div(g, a));
                break;
            case Op::Sqrt:
                if (need_a) accumulate(a, div(scale(g, 0.5), i));
                break;
            case Op::BceLogits:
                // d/dz = sigmoid(z) - y
                if (need_a) accumulate(a, mul(g, sub(sigmoid(a), b)));
                break;
        }
    }

    std::vector<NodeId> result;
    result.reserve(wrt.size());
    for (NodeId w : wrt) {
        NodeId id = (w >= 0 && w <= out) ? adj[w] : kNoNode;
        if (id == kNoNode) {
            const Matrix& W = nodes_[w].val;
            id = constant(Matrix::zeros(W.rows, W.cols));
        }
        result.push_back(id);
    }
    return result;
}

}  // namespace cec
