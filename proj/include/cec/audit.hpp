#pragma once

#include <string>
#include <vector>

#include "cec/metrics.hpp"

namespace cec {

struct AuditConfig {
    int ig_steps = 128;  // audit-side default, tighter than the training 32
    double theta_regime = 0.5;
    std::vector<double> theta_sensitivity{0.3, 0.5, 0.7};
    std::string split = "test";  // test | train | all
    int histogram_bins = 20;
    bool dump_attributions = false;
};

struct AuditReport {
    AuditConfig config;
    std::string train_echo_json;  // training config recorded in the model file

    OutcomeMetrics outcome;
    PopulationCec cec;
    double pfr_value = 0.0;
    RegimeAssignment regimes;  // at theta_regime
    std::vector<RegimeAssignment> regime_sensitivity;

    int n_eval_rows = 0;
    int n_pairs = 0;
    int n_unmatched = 0;
    double coverage = 0.0;

    Vec64 hist_edges;
    std::vector<long> hist_counts;

    // per-pair table (matched rows of the evaluation split)
    std::vector<int> row_id;
    std::vector<int> yhat_x, yhat_cf;
    Vec64 dstar;

    // predictions over every evaluation row, matched or not
    std::vector<int> eval_rows;
    Vec64 scores;
    std::vector<int> yhat;

    // optional per-feature attribution dump (rows align with row_id)
    Matrix att_raw_x, att_norm_x, att_raw_cf, att_norm_cf;
};

AuditReport run_audit(const MlpModel& model, const Dataset& d, const CounterfactualMap& map,
                      const BaselineSet& baselines, const AuditConfig& config,
                      const std::string& train_echo_json = "");

// Deterministic serialization (no timestamps); the pipeline's bit-identity
// guarantee rests on this.
std::string audit_to_json(const AuditReport& report);

// audit.json + per_instance.csv + predictions.csv + regime_distribution.csv
// (+ attributions.csv when configured).
void save_audit(const AuditReport& report, const Dataset& d, const std::string& dir);

// Cross-run comparison (ablations, baselines): Pareto flags over
// (F1, EO gap, CEC) plus scatter/regime data for plotting.
struct RunSummary {
    std::string name;
    double f1 = 0.0;
    double eo_gap = 0.0;
    double cec = 0.0;
    double pfr = 0.0;
    std::array<double, 4> regime_fraction{};
};

RunSummary summarize_audit_json(const std::string& path, const std::string& name);
void save_comparison(const std::vector<RunSummary>& runs, const std::string& dir);

}  // namespace cec
