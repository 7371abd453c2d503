#include <doctest.h>

#include <cstring>

#include "cec/mlp.hpp"
#include "cec/rng.hpp"
#include "cec/tape.hpp"
#include "oracles.hpp"

using namespace cec;

namespace {

MlpModel linear_model(const Vec64& w, double bias) {
    MlpModel m;
    m.input_dim = static_cast<int>(w.size());
    m.hidden = {};
    m.dropout = 0.0;
    m.weights.push_back(Matrix::row(w));
    m.biases.push_back(Matrix::full(1, 1, bias));
    return m;
}

Vec64 random_vec(Rng& rng, int n, double lo = -1.5, double hi = 1.5) {
    Vec64 v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

// ||d logit / dx||^2 built on the tape; the canonical double-backprop shape.
double input_grad_norm2(const MlpModel& m, const Vec64& x, Vec64* param_grads = nullptr) {
    Tape tape;
    BoundModel bm = bind_model(tape, m, true);
    NodeId X = tape.leaf(Matrix::row(x), true);
    NodeId f = tape.sum_all(mlp_logits(tape, bm, X));
    auto gx = tape.gradient(f, std::vector<NodeId>{X});
    NodeId s = tape.dot_all(gx[0], gx[0]);
    if (param_grads) *param_grads = grad_params_of_scalar(tape, s, bm);
    return tape.scalar_value(s);
}

}  // namespace

TEST_CASE("forward: linear hand example") {
    auto m = linear_model({1.0, 2.0}, 0.0);
    CHECK(forward(m, {3.0, 4.0}) == doctest::Approx(11.0).epsilon(1e-15));
}

TEST_CASE("forward: deterministic bitwise") {
    auto m = make_mlp(5, {7, 3}, Activation::Tanh, 0.0, 42);
    Rng rng(7);
    Vec64 x = random_vec(rng, 5);
    const double a = forward(m, x);
    const double b = forward(m, x);
    CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
}

TEST_CASE("forward: matches naive loop oracle on random tanh MLPs") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        auto m = make_mlp(6, {8, 5}, Activation::Tanh, 0.0, seed);
        Rng rng(seed + 100);
        Vec64 x = random_vec(rng, 6);
        CHECK(forward(m, x) == doctest::Approx(oracles::naive_forward(m, x)).epsilon(1e-12));
    }
}

TEST_CASE("grad_input: linear model returns the weight vector exactly") {
    auto m = linear_model({1.0, 2.0, -1.0}, 0.7);
    auto g = grad_input(m, {9.0, -3.0, 0.5});
    CHECK(g[0] == 1.0);
    CHECK(g[1] == 2.0);
    CHECK(g[2] == -1.0);
}

TEST_CASE("grad_input: product rule via primitives") {
    // f(x) = x1 * x2 assembled by hand on a tape.
    Tape tape;
    NodeId X = tape.leaf(Matrix::row({3.0, 5.0}), true);
    NodeId x1 = tape.dot_all(X, tape.constant(Matrix::row({1.0, 0.0})));
    NodeId x2 = tape.dot_all(X, tape.constant(Matrix::row({0.0, 1.0})));
    NodeId f = tape.mul(x1, x2);
    auto g = tape.gradient(f, std::vector<NodeId>{X});
    CHECK(tape.value(g[0]).a[0] == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(tape.value(g[0]).a[1] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("grad_input: finite differences on tanh MLPs") {
    for (uint64_t seed = 0; seed < 8; ++seed) {
        auto m = make_mlp(5, {6, 4}, Activation::Tanh, 0.0, seed);
        Rng rng(seed + 11);
        Vec64 x = random_vec(rng, 5);
        auto g = grad_input(m, x);
        auto fd = oracles::fd_gradient([&](const Vec64& v) { return forward(m, v); }, x);
        CHECK(oracles::rel_error(g, fd) < 1e-6);
    }
}

TEST_CASE("grad_params: loss = f(x) for linear model gives x") {
    auto m = linear_model({0.5, -2.0, 3.0}, 0.0);
    Vec64 x{9.0, -3.0, 0.5};
    Tape tape;
    BoundModel bm = bind_model(tape, m, true);
    NodeId f = tape.sum_all(mlp_logits(tape, bm, tape.constant(Matrix::row(x))));
    auto g = grad_params_of_scalar(tape, f, bm);
    REQUIRE(g.size() == 4);  // w (3) + bias (1)
    CHECK(g[0] == doctest::Approx(9.0));
    CHECK(g[1] == doctest::Approx(-3.0));
    CHECK(g[2] == doctest::Approx(0.5));
    CHECK(g[3] == doctest::Approx(1.0));
}

TEST_CASE("grad_params: constant loss gives the zero vector") {
    auto m = make_mlp(3, {4}, Activation::Tanh, 0.0, 1);
    Tape tape;
    BoundModel bm = bind_model(tape, m, true);
    NodeId c = tape.scalar_constant(2.5);
    auto g = grad_params_of_scalar(tape, c, bm);
    for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("grad_params: non-scalar loss is a contract error") {
    auto m = make_mlp(3, {4}, Activation::Tanh, 0.0, 1);
    Tape tape;
    BoundModel bm = bind_model(tape, m, true);
    NodeId X = tape.constant(Matrix::zeros(2, 3));
    NodeId logits = mlp_logits(tape, bm, X);
    CHECK_THROWS_AS((void)grad_params_of_scalar(tape, logits, bm), ContractError);
}

TEST_CASE("double backprop: d/dtheta of ||df/dx||^2 matches finite differences") {
    // 1-hidden-unit net first (the spec's worked case), then slightly bigger.
    for (auto hidden : std::vector<std::vector<int>>{{1}, {4}, {8}}) {
        for (uint64_t seed = 0; seed < 5; ++seed) {
            auto m = make_mlp(3, hidden, Activation::Tanh, 0.0, seed * 13 + 1);
            Rng rng(seed + 23);
            Vec64 x = random_vec(rng, 3);
            Vec64 grads;
            input_grad_norm2(m, x, &grads);
            auto fd = oracles::fd_gradient(
                [&](const Vec64& p) {
                    MlpModel mm = m;
                    mm.set_flat_params(p);
                    return input_grad_norm2(mm, x);
                },
                m.flat_params());
            CHECK(oracles::rel_error(grads, fd) < 1e-5);
        }
    }
}

TEST_CASE("double backprop: gradients are bitwise deterministic") {
    auto m = make_mlp(4, {6}, Activation::Tanh, 0.0, 5);
    Rng rng(99);
    Vec64 x = random_vec(rng, 4);
    Vec64 g1, g2;
    input_grad_norm2(m, x, &g1);
    input_grad_norm2(m, x, &g2);
    REQUIRE(g1.size() == g2.size());
    CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("tape: shape mismatches are contract errors") {
    Tape tape;
    NodeId a = tape.constant(Matrix::zeros(2, 3));
    NodeId b = tape.constant(Matrix::zeros(3, 2));
    CHECK_THROWS_AS((void)tape.add(a, b), ContractError);
    CHECK_THROWS_AS((void)tape.matmul_nt(a, tape.constant(Matrix::zeros(2, 4))), ContractError);
}

TEST_CASE("tape: relu masks give a.e.-correct input gradients") {
    auto m = make_mlp(4, {6, 3}, Activation::Relu, 0.0, 3);
    Rng rng(17);
    Vec64 x = random_vec(rng, 4);
    auto g = grad_input(m, x);
    auto fd = oracles::fd_gradient([&](const Vec64& v) { return forward(m, v); }, x);
    CHECK(oracles::rel_error(g, fd) < 1e-5);
}

TEST_CASE("tape: batched rows equal the one-row path") {
    auto m = make_mlp(5, {7, 4}, Activation::Tanh, 0.0, 21);
    Rng rng(31);
    Matrix X(6, 5);
    for (auto& v : X.a) v = rng.uniform(-1, 1);
    auto scores = predict_scores(m, X);
    for (int i = 0; i < X.rows; ++i) {
        Vec64 row(X.row_ptr(i), X.row_ptr(i) + 5);
        const double logit = forward(m, row);
        const double s = 1.0 / (1.0 + std::exp(-logit));
        CHECK(scores[i] == doctest::Approx(s).epsilon(1e-12));
    }
}
