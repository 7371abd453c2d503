#pragma once

#include <utility>

#include "cec/matcher.hpp"
#include "cec/mlp.hpp"

namespace cec {

// Normalization guard from the score definition; directions with raw norm
// under kDegenerateNorm are flagged since epsilon dominates there.
constexpr double kNormEps = 1e-8;
constexpr double kDegenerateNorm = 1e-6;

struct Attribution {
    Vec64 raw;         // per-coordinate integrated gradients
    Vec64 normalized;  // raw / (||raw|| + eps)
    Vec64 baseline;
    int steps = 0;
    bool degenerate = false;
};

struct CecScore {
    double raw_distance = 0.0;  // chord length between normalized vectors, [0,2]
    double score = 0.0;         // raw_distance / 2, [0,1]
};

// Graph builder for P stacked (input, baseline) rows: midpoint-rule path
// integral with T steps. Returns raw (P x D) and normalized (P x D) nodes,
// both differentiable with respect to the bound parameters.
struct IgNodes {
    NodeId raw = kNoNode;
    NodeId normalized = kNoNode;
};
IgNodes build_ig(Tape& tape, const BoundModel& bm, const Matrix& inputs,
                 const Matrix& baselines, int steps,
                 const std::vector<NodeId>* dropout_masks = nullptr);

Attribution integrated_gradients(const MlpModel& model, const Vec64& x, const Vec64& b,
                                 int steps);

// Both attributions against the identical baseline b. When a BaselineSet is
// supplied, b must equal the factual's label-group baseline b_{y,a} exactly.
std::pair<Attribution, Attribution> pair_attributions(const MlpModel& model, const Vec64& x,
                                                      const Vec64& x_cf, const Vec64& b, int steps,
                                                      const BaselineSet* check = nullptr,
                                                      int y = -1, int a = -1);

double cec_from_normalized(const Vec64& gx, const Vec64& gcf);
CecScore cec_score(const Attribution& attr_x, const Attribution& attr_cf);

struct PopulationCec {
    double mean = 0.0;                // over all matched pairs
    double mean_nondegenerate = 0.0;  // excluding degenerate-attribution pairs
    int n_pairs = 0;
    int n_unmatched = 0;
    int n_degenerate = 0;
    Vec64 per_pair;                    // score per pair, pair order
    std::vector<char> degenerate_flag; // per pair
};

// Mean CEC score over the matched pairs; unmatched rows are excluded and
// counted. Zero pairs is an error.
PopulationCec population_cec(const MlpModel& model, const PairedDataset& pairs, int steps);

}  // namespace cec
