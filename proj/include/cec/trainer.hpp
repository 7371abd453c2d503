#pragma once

#include <string>
#include <vector>

#include "cec/attribution.hpp"
#include "cec/dataset.hpp"
#include "cec/matcher.hpp"
#include "cec/mlp.hpp"

namespace cec {

enum class Variant { PredOnly, PredEo, PredCec, Full };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct TrainConfig {
    double lambda_eo = 1.0;
    double lambda_cec = 1.0;
    double learning_rate = 3e-4;
    int epochs = 30;
    int batch_size = 64;
    int ig_steps = 32;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 1;
    Variant variant = Variant::Full;
    std::vector<int> hidden{128, 64};
    Activation activation = Activation::Tanh;
    double dropout = 0.2;
    double tau_cls = 0.5;
    bool ig_dropout = false;  // prediction passes always see dropout; IG only when set

    // The variant forces the unused weights to zero.
    double effective_lambda_eo() const {
        return variant == Variant::PredEo || variant == Variant::Full ? lambda_eo : 0.0;
    }
    double effective_lambda_cec() const {
        return variant == Variant::PredCec || variant == Variant::Full ? lambda_cec : 0.0;
    }

    void validate() const;
    static TrainConfig from_json(const std::string& text);
    static TrainConfig from_json_file(const std::string& path);
    std::string to_json() const;
};

struct LossBreakdown {
    double l_pred = 0.0;
    double l_eo = 0.0;
    double l_cec = 0.0;
    double total = 0.0;
};

struct EpochStats {
    int epoch = 0;
    LossBreakdown mean;             // batch-averaged
    int eo_missing_cell_batches = 0;  // a (y,a) cell absent from some batch
    int cec_empty_batches = 0;        // batch had no matched pair
};

struct TrainResult {
    MlpModel model;
    std::vector<EpochStats> history;
    bool diverged = false;
    int completed_epochs = 0;
};

// --- loss graph builders (shared by training, tests and the acceptance
//     suite; all are pure functions of the bound parameters and the batch) ---

// Mean stabilized binary cross-entropy over the batch.
NodeId build_pred_loss(Tape& tape, const BoundModel& bm, const Matrix& X,
                       const std::vector<int>& y,
                       const std::vector<NodeId>* dropout_masks = nullptr);

// Squared soft-rate gaps (TPR and FPR, sigmoid outputs). A (y,a) cell missing
// from the batch zeroes the affected gap term and bumps *missing_cells.
NodeId build_eo_loss(Tape& tape, const BoundModel& bm, const Matrix& X, const std::vector<int>& y,
                     const std::vector<int>& a, int* missing_cells = nullptr);

// Mean squared per-pair CEC score; differentiable through the recorded IG
// sweeps (double backpropagation).
NodeId build_cec_loss(Tape& tape, const BoundModel& bm, const Matrix& x, const Matrix& xcf,
                      const Matrix& baseline, int ig_steps,
                      const std::vector<NodeId>* ig_dropout_masks = nullptr);

// --- value front-ends ---

double loss_pred(const MlpModel& model, const Matrix& X, const std::vector<int>& y);
double loss_eo(const MlpModel& model, const Matrix& X, const std::vector<int>& y,
               const std::vector<int>& a, int* missing_cells = nullptr);
double loss_cec(const MlpModel& model, const PairedDataset& batch, int ig_steps);

// Gradient of the full weighted objective at the model's current parameters
// (used by gradient-correctness checks).
Vec64 grad_total_loss(const MlpModel& model, const Matrix& X, const std::vector<int>& y,
                      const std::vector<int>& a, const PairedDataset& pairs,
                      const TrainConfig& cfg, LossBreakdown* breakdown = nullptr);

// Algorithm: phase-1 artifacts (baselines, counterfactual map) are inputs;
// minibatch Adam over shuffled training rows; matched rows of each batch form
// the CEC pairs. Deterministic for a fixed seed.
TrainResult train(const Dataset& data, const PairedDataset& train_pairs, const TrainConfig& cfg);

void save_history_csv(const std::vector<EpochStats>& history, const std::string& path);

}  // namespace cec
