#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cec/attribution.hpp"
#include "cec/dataset.hpp"
#include "cec/matcher.hpp"
#include "cec/mlp.hpp"

namespace cec {

struct GroupConfusion {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long positives() const { return tp + fn; }
    long negatives() const { return fp + tn; }
};

// Evaluation-time metrics use hard predictions at tau_cls, unlike the
// training loss's soft rates.
struct OutcomeMetrics {
    std::optional<double> auc;     // absent for a single-class evaluation set
    double f1 = 0.0;
    std::optional<double> eo_gap;  // max(|TPR0-TPR1|, |FPR0-FPR1|)
    std::optional<double> sp_gap;  // |P(yhat=1|a=0) - P(yhat=1|a=1)|
    std::array<GroupConfusion, 2> confusion;  // by group
    std::vector<std::string> flags;
};

std::vector<int> hard_predictions(const MlpModel& model, const Dataset& d,
                                  const std::vector<int>& rows);

OutcomeMetrics outcome_metrics(const MlpModel& model, const Dataset& d,
                               const std::vector<int>& rows);

// Mann-Whitney rank AUC with midrank tie handling.
std::optional<double> rank_auc(const Vec64& scores, const std::vector<int>& labels);

// Prediction flip rate over matched pairs.
double pfr(const MlpModel& model, const PairedDataset& pairs);

enum class Regime { A, B, C, D };
char regime_letter(Regime r);

// Per-pair regime assignment: prediction consistency crossed with
// explanation consistency at threshold theta.
struct RegimeAssignment {
    double theta = 0.5;
    std::vector<char> pred_consistent;
    std::vector<char> expl_consistent;
    std::vector<Regime> regime;
    std::array<double, 4> fraction{};  // A,B,C,D over matched pairs
    std::array<long, 4> count{};

    long flips() const { return count[2] + count[3]; }
};

RegimeAssignment assign_regimes(const MlpModel& model, const PairedDataset& pairs, double theta,
                                int ig_steps);
// Shared-computation variant for audits that already hold per-pair scores.
RegimeAssignment assign_regimes_from(const Vec64& per_pair_cec,
                                     const std::vector<char>& pred_consistent, double theta);

// One training run in (F1 up, EO gap down, CEC down) space.
struct RunPoint {
    double f1 = 0.0;
    double eo_gap = 0.0;
    double cec = 0.0;
};

// Flag[i] set iff no other run is strictly better on all three objectives.
std::vector<char> pareto_nondominated(const std::vector<RunPoint>& runs);

}  // namespace cec
