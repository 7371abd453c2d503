#include <doctest.h>

#include <cmath>

#include "cec/metrics.hpp"
#include "cec/rng.hpp"

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

Dataset labeled_data(const std::vector<double>& logits, const std::vector<int>& y,
                     const std::vector<int>& a) {
    Dataset d;
    const int n = static_cast<int>(y.size());
    d.X = Matrix(n, 1);
    for (int i = 0; i < n; ++i) d.X.at(i, 0) = logits[i];
    d.y = y;
    d.a = a;
    d.schema.feature_names = {"z"};
    d.schema.financial_idx = {0};
    return d;
}

std::vector<int> all_rows(const Dataset& d) {
    std::vector<int> rows(d.n());
    for (int i = 0; i < d.n(); ++i) rows[i] = i;
    return rows;
}

}  // namespace

TEST_CASE("outcome_metrics: perfect classifier") {
    auto m = linear_model({1.0, 0.0});  // logit = z, protected column inert
    Dataset d = labeled_data({4, 5, -6, -3, 7, -4}, {1, 1, 0, 0, 1, 0}, {0, 1, 0, 1, 1, 0});
    OutcomeMetrics om = outcome_metrics(m, d, all_rows(d));
    REQUIRE(om.auc.has_value());
    CHECK(*om.auc == doctest::Approx(1.0));
    CHECK(om.f1 == doctest::Approx(1.0));
    REQUIRE(om.eo_gap.has_value());
    CHECK(*om.eo_gap == doctest::Approx(0.0));
}

TEST_CASE("outcome_metrics: constant positive classifier") {
    auto m = linear_model({0.0, 0.0}, 10.0);  // always predicts 1
    Dataset d = labeled_data({0, 0, 0, 0, 0, 0, 0, 0}, {1, 1, 1, 0, 0, 0, 1, 0},
                             {0, 1, 0, 1, 0, 1, 1, 0});
    OutcomeMetrics om = outcome_metrics(m, d, all_rows(d));
    REQUIRE(om.sp_gap.has_value());
    CHECK(*om.sp_gap == doctest::Approx(0.0));
    REQUIRE(om.eo_gap.has_value());
    CHECK(*om.eo_gap == doctest::Approx(0.0));
    const double p = 0.5;  // positive label rate
    CHECK(om.f1 == doctest::Approx(2 * p / (p + 1)));
    CHECK(!om.auc.has_value() == false);  // both classes present, auc defined
    CHECK(*om.auc == doctest::Approx(0.5));
}

TEST_CASE("outcome_metrics: single-class set has null auc") {
    auto m = linear_model({1.0, 0.0});
    Dataset d = labeled_data({1, 2, 3}, {1, 1, 1}, {0, 1, 0});
    OutcomeMetrics om = outcome_metrics(m, d, all_rows(d));
    CHECK(!om.auc.has_value());
    CHECK(!om.flags.empty());
}

TEST_CASE("rank_auc: midrank tie handling, hand-checked") {
    // scores (0.5, 0.5, 0.2), labels (1, 0, 0): ranks 2.5, 2.5, 1 -> U = 1.5
    auto auc = rank_auc({0.5, 0.5, 0.2}, {1, 0, 0});
    REQUIRE(auc.has_value());
    CHECK(*auc == doctest::Approx(0.75));
}

TEST_CASE("rank_auc: random scores sit near one half") {
    Rng rng(12);
    Vec64 scores(2000);
    std::vector<int> labels(2000);
    for (int i = 0; i < 2000; ++i) {
        scores[i] = rng.uniform01();
        labels[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    auto auc = rank_auc(scores, labels);
    REQUIRE(auc.has_value());
    CHECK(std::fabs(*auc - 0.5) < 0.03);
}

TEST_CASE("pfr: fixed points and an independent recount") {
    auto m = linear_model({1.0, 0.0});
    SUBCASE("identical counterfactuals never flip") {
        PairedDataset p;
        p.x = Matrix(3, 2, {1, 0, -2, 0, 3, 1});
        p.xcf = p.x;
        p.baseline = Matrix(3, 2);
        p.row_id = {0, 1, 2};
        p.cf_id = {0, 1, 2};
        p.y = {1, 0, 1};
        p.a = {0, 0, 1};
        p.dist = {0, 0, 0};
        CHECK(pfr(m, p) == 0.0);
    }
    SUBCASE("anti-correlated predictions always flip") {
        PairedDataset p;
        p.x = Matrix(2, 2, {2, 0, -3, 0});
        p.xcf = Matrix(2, 2, {-2, 1, 3, 1});
        p.baseline = Matrix(2, 2);
        p.row_id = {0, 1};
        p.cf_id = {2, 3};
        p.y = {1, 0};
        p.a = {0, 0};
        p.dist = {0, 0};
        CHECK(pfr(m, p) == 1.0);
    }
    SUBCASE("random pairs match a hand recount") {
        Rng rng(44);
        const int n = 200;
        PairedDataset p;
        p.x = Matrix(n, 2);
        p.xcf = Matrix(n, 2);
        p.baseline = Matrix(n, 2);
        for (auto& v : p.x.a) v = rng.uniform(-1, 1);
        for (auto& v : p.xcf.a) v = rng.uniform(-1, 1);
        p.row_id.resize(n);
        p.cf_id.resize(n);
        p.y.assign(n, 1);
        p.a.assign(n, 0);
        p.dist.assign(n, 0.0);
        long flips = 0;
        for (int i = 0; i < n; ++i) {
            const int hx = 1.0 / (1.0 + std::exp(-p.x.at(i, 0))) >= 0.5 ? 1 : 0;
            const int hc = 1.0 / (1.0 + std::exp(-p.xcf.at(i, 0))) >= 0.5 ? 1 : 0;
            flips += hx != hc;
        }
        CHECK(pfr(m, p) == doctest::Approx(static_cast<double>(flips) / n));
    }
}

TEST_CASE("assign_regimes: taxonomy mapping") {
    SUBCASE("identical counterfactuals are all regime A") {
        auto r = assign_regimes_from({0.0, 0.0, 0.0}, {1, 1, 1}, 0.5);
        CHECK(r.fraction[0] == 1.0);
        CHECK(r.count[0] == 3);
    }
    SUBCASE("flips with opposed reasoning are regime D") {
        auto r = assign_regimes_from({1.0, 1.0}, {0, 0}, 0.5);
        CHECK(r.fraction[3] == 1.0);
    }
    SUBCASE("agreeing predictions with orthogonal attributions are regime B") {
        const double orthogonal = std::sqrt(2.0) / 2.0;  // above theta = 0.5
        auto r = assign_regimes_from({orthogonal}, {1}, 0.5);
        CHECK(r.regime[0] == Regime::B);
    }
    SUBCASE("consistent reasoning with a flip is regime C") {
        auto r = assign_regimes_from({0.1}, {0}, 0.5);
        CHECK(r.regime[0] == Regime::C);
    }
    SUBCASE("fractions sum to one and C+D counts equal flips") {
        Rng rng(9);
        const int n = 500;
        Vec64 cec(n);
        std::vector<char> pc(n);
        for (int i = 0; i < n; ++i) {
            cec[i] = rng.uniform01();
            pc[i] = rng.bernoulli(0.7) ? 1 : 0;
        }
        auto r = assign_regimes_from(cec, pc, 0.5);
        CHECK(std::fabs(r.fraction[0] + r.fraction[1] + r.fraction[2] + r.fraction[3] - 1.0) <
              1e-9);
        long flips = 0;
        for (char c : pc) flips += c ? 0 : 1;
        CHECK(r.flips() == flips);
    }
    SUBCASE("theta outside (0,1) is rejected") {
        CHECK_THROWS_AS((void)assign_regimes_from({0.2}, {1}, 0.0), ConfigError);
        CHECK_THROWS_AS((void)assign_regimes_from({0.2}, {1}, 1.0), ConfigError);
    }
}

TEST_CASE("pareto_nondominated: fixed cases and exhaustive oracle") {
    SUBCASE("single run is non-dominated") {
        CHECK(pareto_nondominated({{0.8, 0.1, 0.3}}) == std::vector<char>{1});
    }
    SUBCASE("strictly worse run is dominated") {
        auto flags = pareto_nondominated({{0.9, 0.05, 0.2}, {0.8, 0.10, 0.3}});
        CHECK(flags == std::vector<char>{1, 0});
    }
    SUBCASE("ties do not dominate") {
        auto flags = pareto_nondominated({{0.9, 0.05, 0.2}, {0.9, 0.05, 0.2}});
        CHECK(flags == std::vector<char>{1, 1});
    }
    SUBCASE("20 random triples agree with the pairwise oracle") {
        Rng rng(77);
        std::vector<RunPoint> runs(20);
        for (auto& r : runs) {
            r.f1 = rng.uniform01();
            r.eo_gap = rng.uniform01();
            r.cec = rng.uniform01();
        }
        const auto flags = pareto_nondominated(runs);
        for (size_t i = 0; i < runs.size(); ++i) {
            bool dominated = false;
            for (size_t j = 0; j < runs.size(); ++j) {
                if (j == i) continue;
                if (runs[j].f1 > runs[i].f1 && runs[j].eo_gap < runs[i].eo_gap &&
                    runs[j].cec < runs[i].cec) {
                    dominated = true;
                }
            }
            CHECK(flags[i] == (dominated ? 0 : 1));
        }
    }
}
