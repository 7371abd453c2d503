#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

#include "cec/common.hpp"

namespace cec {

// Dense row-major matrix backing every tape node value. A scalar is 1x1 and a
// row vector is 1xC.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    Matrix(int r, int c, std::vector<double> v) : rows(r), cols(c), a(std::move(v)) {
        assert(static_cast<size_t>(rows) * cols == a.size());
    }

    static Matrix zeros(int r, int c) { return Matrix(r, c); }
    static Matrix full(int r, int c, double v) {
        Matrix m(r, c);
        for (auto& x : m.a) x = v;
        return m;
    }
    static Matrix row(const Vec64& v) { return Matrix(1, static_cast<int>(v.size()), v); }

    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    double* row_ptr(int r) { return a.data() + static_cast<size_t>(r) * cols; }
    const double* row_ptr(int r) const { return a.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return a.size(); }
    bool is_scalar() const { return rows == 1 && cols == 1; }
    double scalar() const {
        assert(is_scalar());
        return a[0];
    }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

namespace kernels {

// C += A * B, A: r x k, B: k x c. ikj order keeps the inner loop contiguous.
inline void gemm_nn(const Matrix& A, const Matrix& B, Matrix& C) {
    assert(A.cols == B.rows && C.rows == A.rows && C.cols == B.cols);
    const int r = A.rows, k = A.cols, c = B.cols;
    for (int i = 0; i < r; ++i) {
        const double* arow = A.row_ptr(i);
        double* crow = C.row_ptr(i);
        for (int l = 0; l < k; ++l) {
            const double av = arow[l];
            if (av == 0.0) continue;
            const double* brow = B.row_ptr(l);
            for (int j = 0; j < c; ++j) crow[j] += av * brow[j];
        }
    }
}

// C += A * B^T, A: r x k, B: c x k. For tall A the transpose of B is built
// once so the contiguous gemm_nn path applies; otherwise four B rows per pass
// reuse the A row from registers.
inline void gemm_nt(const Matrix& A, const Matrix& B, Matrix& C) {
    assert(A.cols == B.cols && C.rows == A.rows && C.cols == B.rows);
    const int r = A.rows, k = A.cols, c = B.rows;
    if (r >= 64 && k > 1 && c > 1) {
        Matrix Bt(k, c);
        for (int j = 0; j < c; ++j) {
            const double* brow = B.row_ptr(j);
            for (int l = 0; l < k; ++l) Bt.at(l, j) = brow[l];
        }
        gemm_nn(A, Bt, C);
        return;
    }
    for (int i = 0; i < r; ++i) {
        const double* arow = A.row_ptr(i);
        double* crow = C.row_ptr(i);
        int j = 0;
        for (; j + 4 <= c; j += 4) {
            const double* b0 = B.row_ptr(j);
            const double* b1 = B.row_ptr(j + 1);
            const double* b2 = B.row_ptr(j + 2);
            const double* b3 = B.row_ptr(j + 3);
            double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
            for (int l = 0; l < k; ++l) {
                const double av = arow[l];
                s0 += av * b0[l];
                s1 += av * b1[l];
                s2 += av * b2[l];
                s3 += av * b3[l];
            }
            crow[j] += s0;
            crow[j + 1] += s1;
            crow[j + 2] += s2;
            crow[j + 3] += s3;
        }
        for (; j < c; ++j) {
            const double* brow = B.row_ptr(j);
            double s = 0.0;
            for (int l = 0; l < k; ++l) s += arow[l] * brow[l];
            crow[j] += s;
        }
    }
}

// C += A^T * B, A: k x r, B: k x c. Rank-1 accumulation over k.
inline void gemm_tn(const Matrix& A, const Matrix& B, Matrix& C) {
    assert(A.rows == B.rows && C.rows == A.cols && C.cols == B.cols);
    const int k = A.rows, r = A.cols, c = B.cols;
    for (int l = 0; l < k; ++l) {
        const double* arow = A.row_ptr(l);
        const double* brow = B.row_ptr(l);
        for (int i = 0; i < r; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = C.row_ptr(i);
            for (int j = 0; j < c; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace kernels

inline double dot(const Vec64& a, const Vec64& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double l2_norm(const Vec64& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

}  // namespace cec
