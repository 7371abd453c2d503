#pragma once

#include <string>
#include <vector>

#include "cec/audit.hpp"
#include "cec/synthetic.hpp"
#include "cec/trainer.hpp"

namespace cec {

// Stage functions behind the CLI subcommands. Each writes its artifacts plus
// a manifest.json into out_dir and is deterministic for fixed inputs/seeds.

// generate -> split -> standardize(train) -> dataset.csv + meta.json
void stage_synth(const SyntheticConfig& config, const std::string& out_dir);

// build train indices -> match all rows -> baselines -> map.csv,
// baselines.json, match_meta.json
void stage_match(const std::string& data_dir, double tau_dist, const std::string& out_dir);

struct TrainStage {
    MlpModel model;
    std::vector<EpochStats> history;
    bool diverged = false;
};

// pairs over the train split -> train -> model.json + history.csv
TrainStage stage_train(const std::string& data_dir, const std::string& match_dir,
                       const TrainConfig& config, const std::string& out_dir);

AuditReport stage_audit(const std::string& model_path, const std::string& data_dir,
                        const std::string& match_dir, const AuditConfig& config,
                        const std::string& out_dir);

// 6x6 lambda grid (the sensitivity axes); emits sweep.csv with the metric
// grid per cell. Training epochs/steps come from the base config.
struct SweepCell {
    double lambda_eo = 0.0, lambda_cec = 0.0;
    double f1 = 0.0, auc = 0.0, eo_gap = 0.0, sp_gap = 0.0;
    double cec = 0.0, pfr = 0.0;
    std::array<double, 4> regime_fraction{};
};

std::vector<SweepCell> stage_sweep(const std::string& data_dir, const std::string& match_dir,
                                   const TrainConfig& base, const AuditConfig& audit_config,
                                   const std::vector<double>& grid, const std::string& out_dir);

void stage_compare(const std::vector<std::string>& report_paths,
                   const std::vector<std::string>& names, const std::string& out_dir);

// Default lambda grid from the sensitivity analysis.
std::vector<double> default_sweep_grid();

}  // namespace cec
