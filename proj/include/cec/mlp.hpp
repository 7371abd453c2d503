#pragma once

#include <string>
#include <vector>

#include "cec/matrix.hpp"
#include "cec/rng.hpp"
#include "cec/tape.hpp"

namespace cec {

enum class Activation { Tanh, Relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Parameter container for the scorer. Layer l maps in_l -> out_l with weight
// matrix (out_l x in_l) and bias row (1 x out_l); the final layer emits one
// logit and has no activation. hidden == {} gives a plain linear model.
struct MlpModel {
    int input_dim = 0;
    std::vector<int> hidden{128, 64};
    Activation activation = Activation::Tanh;
    double dropout = 0.2;
    double tau_cls = 0.5;  // classification threshold on the sigmoid output
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;  // stored as 1 x out rows

    int layer_count() const { return static_cast<int>(weights.size()); }
    size_t param_count() const;
    Vec64 flat_params() const;
    void set_flat_params(const Vec64& flat);
    void check_finite() const;
};

// Freshly initialized model: uniform fan-in scaling, seeded.
MlpModel make_mlp(int input_dim, const std::vector<int>& hidden, Activation act,
                  double dropout, uint64_t seed);

// Tape bindings of the model parameters. `params` lists leaves in canonical
// flat order (W0, b0, W1, b1, ...), matching flat_params().
struct BoundModel {
    const MlpModel* model = nullptr;
    std::vector<NodeId> weights;
    std::vector<NodeId> biases;
    std::vector<NodeId> params;
};

BoundModel bind_model(Tape& tape, const MlpModel& model, bool requires_grad = true);

// Logits for a batch: X is (n x input_dim), result is (n x 1). Optional
// dropout masks (one constant node per hidden layer, same shape as the layer
// activation) are multiplied in after the activation.
NodeId mlp_logits(Tape& tape, const BoundModel& bm, NodeId X,
                  const std::vector<NodeId>* dropout_masks = nullptr);

// Flattens the adjoints of bm.params (in canonical order) into one vector.
Vec64 read_param_grads(const Tape& tape, const std::vector<NodeId>& adjoints);

// --- scoring front-ends (deterministic, no dropout) ---

double forward(const MlpModel& model, const Vec64& x);

// Batched scores: sigma(logit) per row.
Vec64 predict_scores(const MlpModel& model, const Matrix& X);

// d logit / dx at x.
Vec64 grad_input(const MlpModel& model, const Vec64& x);

// Gradient of a scalar loss with respect to the bound parameters.
Vec64 grad_params_of_scalar(Tape& tape, NodeId loss, const BoundModel& bm);

// --- serialization ---

std::string model_to_json(const MlpModel& model, const std::string& train_echo_json = "");
MlpModel model_from_json(const std::string& text);
void save_model(const MlpModel& model, const std::string& path,
                const std::string& train_echo_json = "");
MlpModel load_model(const std::string& path);

}  // namespace cec
