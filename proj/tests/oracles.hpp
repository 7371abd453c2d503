#pragma once

// Independent test oracles. Everything here is deliberately written with
// naive loops, separate from the library's tape/kernels, so the two sides of
// each comparison share no code.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "cec/dataset.hpp"
#include "cec/mlp.hpp"

namespace oracles {

// Straight-line forward pass with nested loops, no tape.
inline double naive_forward(const cec::MlpModel& m, const std::vector<double>& x) {
    std::vector<double> h = x;
    for (int l = 0; l < m.layer_count(); ++l) {
        const auto& W = m.weights[l];
        const auto& b = m.biases[l];
        std::vector<double> z(W.rows, 0.0);
        for (int i = 0; i < W.rows; ++i) {
            double s = b.a[i];
            for (int j = 0; j < W.cols; ++j) s += W.at(i, j) * h[j];
            z[i] = s;
        }
        if (l + 1 < m.layer_count()) {
            for (auto& v : z)
                v = m.activation == cec::Activation::Tanh ? std::tanh(v) : (v > 0 ? v : 0.0);
        }
        h = std::move(z);
    }
    return h[0];
}

// Central finite-difference gradient of f at x.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5) {
    std::vector<double> g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double fp = f(x);
        x[i] = orig - h;
        const double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Max |a-b| scaled by the largest magnitude in either vector (floored at 1).
inline double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double scale = 1.0, diff = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        scale = std::max({scale, std::fabs(a[i]), std::fabs(b[i])});
        diff = std::max(diff, std::fabs(a[i] - b[i]));
    }
    return diff / scale;
}

// Exhaustive opposite-group same-label nearest neighbor over the training
// rows, squared distances accumulated in financial-index order, ties to the
// lowest row id. Mirrors the matcher contract with an O(n^2) scan.
struct BruteMatch {
    int row = -1;
    double dist2 = 0.0;
};

inline BruteMatch brute_force_match(const cec::Dataset& d, const std::vector<int>& train_rows,
                                    int query_row) {
    BruteMatch best;
    best.dist2 = std::numeric_limits<double>::infinity();
    for (int j : train_rows) {
        if (d.y[j] != d.y[query_row] || d.a[j] != 1 - d.a[query_row]) continue;
        double d2 = 0.0;
        for (int f : d.schema.financial_idx) {
            const double diff = d.X.at(query_row, f) - d.X.at(j, f);
            d2 += diff * diff;
        }
        if (d2 < best.dist2 || (d2 == best.dist2 && j < best.row)) {
            best.dist2 = d2;
            best.row = j;
        }
    }
    return best;
}

// Normalized attribution distance computed with plain loops (the halved
// chord between eps-guarded unit vectors).
inline double normalized_distance_oracle(const std::vector<double>& u,
                                         const std::vector<double>& v) {
    auto norm = [](const std::vector<double>& w) {
        double s = 0;
        for (double x : w) s += x * x;
        return std::sqrt(s);
    };
    const double nu = norm(u) + 1e-8, nv = norm(v) + 1e-8;
    double s = 0;
    for (size_t i = 0; i < u.size(); ++i) {
        const double diff = u[i] / nu - v[i] / nv;
        s += diff * diff;
    }
    return std::sqrt(s) / 2.0;
}

}  // namespace oracles
