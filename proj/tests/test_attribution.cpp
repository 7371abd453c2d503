#include <doctest.h>

#include <cmath>

#include "cec/attribution.hpp"
#include "cec/rng.hpp"
#include "oracles.hpp"

using namespace cec;

namespace {

MlpModel linear_model(const Vec64& w, double bias = 0.0) {
    MlpModel m;
    m.input_dim = static_cast<int>(w.size());
    m.hidden = {};
    m.dropout = 0.0;
    m.weights.push_back(Matrix::row(w));
    m.biases.push_back(Matrix::full(1, 1, bias));
    return m;
}

Vec64 random_vec(Rng& rng, int n, double lo = -2.0, double hi = 2.0) {
    Vec64 v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

Vec64 random_unit(Rng& rng, int n) {
    Vec64 v(n);
    double s = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        s += x * x;
    }
    for (auto& x : v) x /= std::sqrt(s);
    return v;
}

Attribution from_normalized(Vec64 g) {
    Attribution a;
    a.raw = g;
    a.normalized = std::move(g);
    return a;
}

}  // namespace

TEST_CASE("integrated_gradients: exact for linear models at any step count") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 4;
        Vec64 w = random_vec(rng, d), x = random_vec(rng, d), b = random_vec(rng, d);
        auto m = linear_model(w, rng.uniform(-1, 1));
        for (int T : {1, 7, 32}) {
            Attribution ig = integrated_gradients(m, x, b, T);
            for (int j = 0; j < d; ++j) {
                CHECK(std::fabs(ig.raw[j] - (x[j] - b[j]) * w[j]) <= 1e-12);
            }
        }
    }
}

TEST_CASE("integrated_gradients: zero path gives zero attribution") {
    auto m = make_mlp(5, {6}, Activation::Tanh, 0.0, 2);
    Rng rng(3);
    Vec64 x = random_vec(rng, 5);
    Attribution ig = integrated_gradients(m, x, x, 64);
    for (double v : ig.raw) CHECK(v == 0.0);
    CHECK(ig.degenerate);
}

TEST_CASE("integrated_gradients: T=32 close to a T=4096 reference") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        auto m = make_mlp(6, {10, 6}, Activation::Tanh, 0.0, seed);
        Rng rng(seed + 7);
        Vec64 x = random_vec(rng, 6), b = random_vec(rng, 6);
        Attribution coarse = integrated_gradients(m, x, b, 32);
        Attribution fine = integrated_gradients(m, x, b, 4096);
        double diff2 = 0.0;
        for (size_t j = 0; j < coarse.raw.size(); ++j) {
            const double dd = coarse.raw[j] - fine.raw[j];
            diff2 += dd * dd;
        }
        CHECK(std::sqrt(diff2) < 1e-3);
    }
}

TEST_CASE("integrated_gradients: completeness at T=256") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        auto m = make_mlp(5, {8, 4}, Activation::Tanh, 0.0, trial);
        Vec64 x = random_vec(rng, 5), b = random_vec(rng, 5);
        Attribution ig = integrated_gradients(m, x, b, 256);
        double total = 0.0;
        for (double v : ig.raw) total += v;
        const double target = forward(m, x) - forward(m, b);
        CHECK(std::fabs(total - target) <= 1e-3 * std::max(1.0, std::fabs(target)));
    }
}

TEST_CASE("pair_attributions: the worked income example") {
    // income weight 1, consistent baseline 50: x=60 -> 10, xcf=62 -> 12
    auto m = linear_model({1.0});
    auto [ax, acf] = pair_attributions(m, {60.0}, {62.0}, {50.0}, 32);
    CHECK(ax.raw[0] == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(acf.raw[0] == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(acf.raw[0] - ax.raw[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("pair_attributions: identical inputs give zero distance") {
    auto m = make_mlp(4, {5}, Activation::Tanh, 0.0, 9);
    Rng rng(10);
    Vec64 x = random_vec(rng, 4), b = random_vec(rng, 4);
    auto [ax, acf] = pair_attributions(m, x, x, b, 16);
    CHECK(ax.raw == acf.raw);
    CHECK(cec_score(ax, acf).raw_distance == 0.0);
}

TEST_CASE("pair_attributions: baseline cancels exactly in linear differences") {
    Rng rng(20);
    const int d = 5;
    Vec64 w = random_vec(rng, d);
    auto m = linear_model(w);
    Vec64 x = random_vec(rng, d), xcf = random_vec(rng, d);
    Vec64 b1 = random_vec(rng, d), b2 = random_vec(rng, d);
    auto [ax1, acf1] = pair_attributions(m, x, xcf, b1, 8);
    auto [ax2, acf2] = pair_attributions(m, x, xcf, b2, 8);
    for (int j = 0; j < d; ++j) {
        const double diff1 = ax1.raw[j] - acf1.raw[j];
        const double diff2 = ax2.raw[j] - acf2.raw[j];
        CHECK(std::fabs(diff1 - diff2) <= 1e-12);
        CHECK(std::fabs(diff1 - (x[j] - xcf[j]) * w[j]) <= 1e-12);
    }
    // group-specific baselines add the spurious (b2_k - b1_k) * w_k term
    Attribution ax_b1 = integrated_gradients(m, x, b1, 8);
    Attribution acf_b2 = integrated_gradients(m, xcf, b2, 8);
    for (int j = 0; j < d; ++j) {
        const double got = ax_b1.raw[j] - acf_b2.raw[j];
        const double want = (x[j] - xcf[j]) * w[j] + (b2[j] - b1[j]) * w[j];
        CHECK(std::fabs(got - want) <= 1e-12);
    }
}

TEST_CASE("pair_attributions: label-group baseline mismatch is a contract error") {
    auto m = linear_model({1.0, 1.0, 1.0});  // model dim = features + a
    BaselineSet bs;
    bs.b[1][0] = {1.0, 2.0, 0.0};
    Vec64 x{0.5, 0.5, 0.0}, xcf{0.4, 0.6, 1.0};
    CHECK_NOTHROW((void)pair_attributions(m, x, xcf, {1.0, 2.0, 0.0}, 8, &bs, 1, 0));
    CHECK_THROWS_AS((void)pair_attributions(m, x, xcf, {9.0, 2.0, 0.0}, 8, &bs, 1, 0),
                    ContractError);
}

TEST_CASE("cec_score: bounds, antipodal and orthogonal cases") {
    Vec64 g{0.6, 0.8};
    Vec64 neg{-0.6, -0.8};
    CHECK(cec_score(from_normalized(g), from_normalized(g)).score == 0.0);
    CHECK(cec_score(from_normalized(g), from_normalized(neg)).score == doctest::Approx(1.0));
    CHECK(cec_score(from_normalized({1.0, 0.0}), from_normalized({0.0, 1.0})).score ==
          doctest::Approx(std::sqrt(2.0) / 2.0));
}

TEST_CASE("cec_score: chord identity against the cosine formula") {
    Rng rng(5);
    for (int trial = 0; trial < 2000; ++trial) {
        Vec64 u = random_unit(rng, 6), v = random_unit(rng, 6);
        const double score = cec_from_normalized(u, v);
        CHECK(score >= 0.0);
        CHECK(score <= 1.0);
        const double cos_theta = dot(u, v) / (l2_norm(u) * l2_norm(v));
        const double chord = 0.5 * std::sqrt(std::max(0.0, 2.0 * (1.0 - cos_theta)));
        CHECK(std::fabs(score - chord) <= 1e-10);
    }
}

TEST_CASE("cec_score: the figure's attribution bars, against the hand oracle") {
    const Vec64 bars_a{0.55, 0.28, 0.10, 0.05, 0.02};
    const Vec64 bars_b{0.08, 0.02, 0.48, 0.38, 0.04};
    const double expected = oracles::normalized_distance_oracle(bars_a, bars_b);
    auto norm = [](Vec64 v) {
        const double n = l2_norm(v) + kNormEps;
        for (auto& x : v) x /= n;
        return v;
    };
    const double got = cec_from_normalized(norm(bars_a), norm(bars_b));
    CHECK(std::fabs(got - expected) <= 1e-12);
    CHECK(got > 0.4);  // visibly different reasoning
}

TEST_CASE("cec_score: scale invariance of the normalized score") {
    // The epsilon guard leaves a tail of order eps/||g||, so the 1e-10 bound
    // is exercised on healthy attribution magnitudes.
    auto normalize = [](Vec64 g) {
        const double n = l2_norm(g) + kNormEps;
        for (auto& v : g) v /= n;
        return g;
    };
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        Vec64 u = random_unit(rng, 5), v = random_unit(rng, 5);
        const double ru = rng.uniform(1e4, 1e6), rv = rng.uniform(1e4, 1e6);
        for (auto& x : u) x *= ru;
        for (auto& x : v) x *= rv;
        const double base = cec_from_normalized(normalize(u), normalize(v));
        for (double c : {0.5, 2.0, 37.0, 1.0 / 37.0}) {
            Vec64 cu = u, cv = v;
            for (auto& x : cu) x *= c;
            for (auto& x : cv) x *= c;
            const double scaled = cec_from_normalized(normalize(cu), normalize(cv));
            CHECK(std::fabs(scaled - base) <= 1e-10);
        }
    }
}

TEST_CASE("attribution: normalized vectors sit on the unit sphere") {
    Rng rng(30);
    auto m = make_mlp(4, {6}, Activation::Tanh, 0.0, 14);
    for (int trial = 0; trial < 50; ++trial) {
        Vec64 x = random_vec(rng, 4), b = random_vec(rng, 4);
        Attribution ig = integrated_gradients(m, x, b, 16);
        if (ig.degenerate) continue;
        const double n = l2_norm(ig.normalized);
        CHECK(n <= 1.0 + 1e-12);
        CHECK(n >= 1.0 - 1e-6);
    }
}

TEST_CASE("population_cec: means, exclusions and errors") {
    // linear model with all-ones weights; craft one zero-distance pair and one
    // antipodal pair -> mean 0.5
    auto m = linear_model({1.0, 1.0});
    PairedDataset p;
    p.x = Matrix(2, 2, {1.0, 1.0, 0.7, -0.7});
    p.xcf = Matrix(2, 2, {1.0, 1.0, -0.7, 0.7});
    p.baseline = Matrix(2, 2, {0.0, 0.0, 0.0, 0.0});
    p.row_id = {0, 1};
    p.cf_id = {2, 3};
    p.y = {1, 1};
    p.a = {0, 0};
    p.dist = {0.0, 0.0};
    p.n_unmatched = 3;

    PopulationCec pc = population_cec(m, p, 16);
    CHECK(pc.per_pair[0] == doctest::Approx(0.0));
    CHECK(pc.per_pair[1] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(pc.mean == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(pc.n_unmatched == 3);
    CHECK(pc.n_degenerate == 0);

    PairedDataset empty;
    CHECK_THROWS_AS((void)population_cec(m, empty, 16), ContractError);
}

TEST_CASE("population_cec: degenerate pairs are reported both ways") {
    auto m = linear_model({1.0, 1.0});
    PairedDataset p;
    // pair 0: x == b so raw attribution is exactly zero -> degenerate
    p.x = Matrix(2, 2, {0.0, 0.0, 0.7, -0.7});
    p.xcf = Matrix(2, 2, {0.5, 0.5, -0.7, 0.7});
    p.baseline = Matrix(2, 2, {0.0, 0.0, 0.0, 0.0});
    p.row_id = {0, 1};
    p.cf_id = {2, 3};
    p.y = {1, 1};
    p.a = {0, 0};
    p.dist = {0.0, 0.0};

    PopulationCec pc = population_cec(m, p, 8);
    CHECK(pc.n_degenerate == 1);
    CHECK(pc.mean_nondegenerate == doctest::Approx(pc.per_pair[1]));
}
