#include "cec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cec {

std::vector<int> hard_predictions(const MlpModel& model, const Dataset& d,
                                  const std::vector<int>& rows) {
    const Vec64 scores = predict_scores(model, d.model_inputs(rows));
    std::vector<int> yhat(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) yhat[i] = scores[i] >= model.tau_cls ? 1 : 0;
    return yhat;
}

std::optional<double> rank_auc(const Vec64& scores, const std::vector<int>& labels) {
    const size_t n = scores.size();
    long n_pos = 0;
    for (int y : labels) n_pos += y;
    const long n_neg = static_cast<long>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;

    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t i, size_t j) { return scores[i] < scores[j]; });

    // Midranks over tied score runs.
    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
        for (size_t k = i; k < j; ++k) {
            if (labels[idx[k]] == 1) pos_rank_sum += midrank;
        }
        i = j;
    }
    const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

OutcomeMetrics outcome_metrics(const MlpModel& model, const Dataset& d,
                               const std::vector<int>& rows) {
    if (rows.empty()) throw ContractError("outcome_metrics: empty evaluation set");
    const Vec64 scores = predict_scores(model, d.model_inputs(rows));
    OutcomeMetrics m;

    std::vector<int> labels(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) labels[i] = d.y[rows[i]];
    m.auc = rank_auc(scores, labels);
    if (!m.auc) m.flags.push_back("auc: evaluation set has a single class");

    long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
        const int row = rows[i];
        const int yhat = scores[i] >= model.tau_cls ? 1 : 0;
        auto& c = m.confusion[d.a[row]];
        if (d.y[row] == 1 && yhat == 1) ++c.tp, ++tp;
        else if (d.y[row] == 0 && yhat == 1) ++c.fp, ++fp;
        else if (d.y[row] == 1 && yhat == 0) ++c.fn, ++fn;
        else ++c.tn;
    }
    const double f1_den = static_cast<double>(2 * tp + fp + fn);
    m.f1 = f1_den > 0 ? 2.0 * tp / f1_den : 0.0;

    const auto& g0 = m.confusion[0];
    const auto& g1 = m.confusion[1];
    const long n0 = g0.positives() + g0.negatives();
    const long n1 = g1.positives() + g1.negatives();
    if (n0 == 0 || n1 == 0) {
        m.flags.push_back("group metrics: a protected group is absent");
    } else {
        if (g0.positives() > 0 && g1.positives() > 0 && g0.negatives() > 0 &&
            g1.negatives() > 0) {
            const double tpr0 = static_cast<double>(g0.tp) / g0.positives();
            const double tpr1 = static_cast<double>(g1.tp) / g1.positives();
            const double fpr0 = static_cast<double>(g0.fp) / g0.negatives();
            const double fpr1 = static_cast<double>(g1.fp) / g1.negatives();
            m.eo_gap = std::max(std::fabs(tpr0 - tpr1), std::fabs(fpr0 - fpr1));
        } else {
            m.flags.push_back("eo_gap: a (y,a) cell is empty");
        }
        const double p0 = static_cast<double>(g0.tp + g0.fp) / n0;
        const double p1 = static_cast<double>(g1.tp + g1.fp) / n1;
        m.sp_gap = std::fabs(p0 - p1);
    }
    return m;
}

namespace {

std::vector<char> prediction_consistency(const MlpModel& model, const PairedDataset& pairs) {
    if (pairs.size() == 0) throw ContractError("matched pairs required");
    const Vec64 sx = predict_scores(model, pairs.x);
    const Vec64 scf = predict_scores(model, pairs.xcf);
    std::vector<char> consistent(pairs.size());
    for (int i = 0; i < pairs.size(); ++i) {
        const int hx = sx[i] >= model.tau_cls ? 1 : 0;
        const int hcf = scf[i] >= model.tau_cls ? 1 : 0;
        consistent[i] = hx == hcf ? 1 : 0;
    }
    return consistent;
}

}  // namespace

double pfr(const MlpModel& model, const PairedDataset& pairs) {
    const auto consistent = prediction_consistency(model, pairs);
    long flips = 0;
    for (char c : consistent) flips += c ? 0 : 1;
    return static_cast<double>(flips) / pairs.size();
}

char regime_letter(Regime r) {
    switch (r) {
        case Regime::A: return 'A';
        case Regime::B: return 'B';
        case Regime::C: return 'C';
        case Regime::D: return 'D';
    }
    return '?';
}

RegimeAssignment assign_regimes_from(const Vec64& per_pair_cec,
                                     const std::vector<char>& pred_consistent, double theta) {
    if (theta <= 0.0 || theta >= 1.0) throw ConfigError("theta_regime must be in (0, 1)");
    if (per_pair_cec.size() != pred_consistent.size())
        throw ContractError("assign_regimes: input length mismatch");
    const size_t n = per_pair_cec.size();
    if (n == 0) throw ContractError("assign_regimes: no matched pairs");

    RegimeAssignment r;
    r.theta = theta;
    r.pred_consistent = pred_consistent;
    r.expl_consistent.resize(n);
    r.regime.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const bool pc = pred_consistent[i] != 0;
        const bool ec = per_pair_cec[i] <= theta;
        r.expl_consistent[i] = ec ? 1 : 0;
        Regime reg = pc ? (ec ? Regime::A : Regime::B) : (ec ? Regime::C : Regime::D);
        r.regime[i] = reg;
        ++r.count[static_cast<int>(reg)];
    }
    for (int k = 0; k < 4; ++k)
        r.fraction[k] = static_cast<double>(r.count[k]) / static_cast<double>(n);
    return r;
}

RegimeAssignment assign_regimes(const MlpModel& model, const PairedDataset& pairs, double theta,
                                int ig_steps) {
    const PopulationCec cec = population_cec(model, pairs, ig_steps);
    return assign_regimes_from(cec.per_pair, prediction_consistency(model, pairs), theta);
}

std::vector<char> pareto_nondominated(const std::vector<RunPoint>& runs) {
    if (runs.empty()) throw ContractError("pareto: need at least one run");
    std::vector<char> flags(runs.size(), 1);
    for (size_t i = 0; i < runs.size(); ++i) {
        for (size_t j = 0; j < runs.size(); ++j) {
            if (i == j) continue;
            const bool dominates = runs[j].f1 > runs[i].f1 && runs[j].eo_gap < runs[i].eo_gap &&
                                   runs[j].cec < runs[i].cec;
            if (dominates) {
                flags[i] = 0;
                break;
            }
        }
    }
    return flags;
}

}  // namespace cec
