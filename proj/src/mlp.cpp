#include "cec/mlp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cec {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw ConfigError("unknown activation: " + s);
}

size_t MlpModel::param_count() const {
    size_t n = 0;
    for (int l = 0; l < layer_count(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

Vec64 MlpModel::flat_params() const {
    Vec64 flat;
    flat.reserve(param_count());
    for (int l = 0; l < layer_count(); ++l) {
        flat.insert(flat.end(), weights[l].a.begin(), weights[l].a.end());
        flat.insert(flat.end(), biases[l].a.begin(), biases[l].a.end());
    }
    return flat;
}

void MlpModel::set_flat_params(const Vec64& flat) {
    if (flat.size() != param_count()) throw ContractError("set_flat_params: size mismatch");
    size_t k = 0;
    for (int l = 0; l < layer_count(); ++l) {
        for (auto& w : weights[l].a) w = flat[k++];
        for (auto& b : biases[l].a) b = flat[k++];
    }
}

void MlpModel::check_finite() const {
    for (int l = 0; l < layer_count(); ++l) {
        require_finite(weights[l].a, "model weights");
        require_finite(biases[l].a, "model biases");
    }
}

MlpModel make_mlp(int input_dim, const std::vector<int>& hidden, Activation act,
                  double dropout, uint64_t seed) {
    if (input_dim <= 0) throw ConfigError("make_mlp: input_dim must be positive");
    MlpModel m;
    m.input_dim = input_dim;
    m.hidden = hidden;
    m.activation = act;
    m.dropout = dropout;
    Rng rng(derive_seed(seed, "mlp-init"));
    std::vector<int> dims{input_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(1);
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const int in = dims[l], out = dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Matrix w(out, in), b(1, out);
        for (auto& x : w.a) x = rng.uniform(-bound, bound);
        for (auto& x : b.a) x = rng.uniform(-bound, bound);
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
    }
    return m;
}

BoundModel bind_model(Tape& tape, const MlpModel& model, bool requires_grad) {
    BoundModel bm;
    bm.model = &model;
    for (int l = 0; l < model.layer_count(); ++l) {
        NodeId w = tape.leaf(model.weights[l], requires_grad);
        NodeId b = tape.leaf(model.biases[l], requires_grad);
        bm.weights.push_back(w);
        bm.biases.push_back(b);
        bm.params.push_back(w);
        bm.params.push_back(b);
    }
    return bm;
}

NodeId mlp_logits(Tape& tape, const BoundModel& bm, NodeId X,
                  const std::vector<NodeId>* dropout_masks) {
    const MlpModel& m = *bm.model;
    if (tape.value(X).cols != m.input_dim) throw SchemaError("mlp_logits: input dim mismatch");
    NodeId h = X;
    const int L = m.layer_count();
    for (int l = 0; l < L; ++l) {
        NodeId z = tape.add_rowvec(tape.matmul_nt(h, bm.weights[l]), bm.biases[l]);
        if (l == L - 1) {
            h = z;  // logit layer
        } else {
            h = m.activation == Activation::Tanh ? tape.tanh(z) : tape.relu(z);
            if (dropout_masks && (*dropout_masks)[l] != kNoNode) {
                h = tape.mul(h, (*dropout_masks)[l]);
            }
        }
    }
    return h;
}

Vec64 read_param_grads(const Tape& tape, const std::vector<NodeId>& adjoints) {
    Vec64 flat;
    for (NodeId id : adjoints) {
        const Matrix& g = tape.value(id);
        flat.insert(flat.end(), g.a.begin(), g.a.end());
    }
    return flat;
}

double forward(const MlpModel& model, const Vec64& x) {
    require_finite(x, "forward input");
    if (static_cast<int>(x.size()) != model.input_dim)
        throw SchemaError("forward: input dim mismatch");
    Tape tape;
    BoundModel bm = bind_model(tape, model, false);
    NodeId X = tape.constant(Matrix::row(x));
    return tape.value(mlp_logits(tape, bm, X)).a[0];
}

Vec64 predict_scores(const MlpModel& model, const Matrix& X) {
    if (X.cols != model.input_dim) throw SchemaError("predict_scores: input dim mismatch");
    Tape tape;
    BoundModel bm = bind_model(tape, model, false);
    NodeId logits = mlp_logits(tape, bm, tape.constant(X));
    return tape.value(tape.sigmoid(logits)).a;
}

Vec64 grad_input(const MlpModel& model, const Vec64& x) {
    require_finite(x, "grad_input input");
    if (static_cast<int>(x.size()) != model.input_dim)
        throw SchemaError("grad_input: input dim mismatch");
    Tape tape;
    BoundModel bm = bind_model(tape, model, false);
    NodeId X = tape.leaf(Matrix::row(x), true);
    NodeId out = tape.sum_all(mlp_logits(tape, bm, X));
    auto g = tape.gradient(out, std::vector<NodeId>{X});
    return tape.value(g[0]).a;
}

Vec64 grad_params_of_scalar(Tape& tape, NodeId loss, const BoundModel& bm) {
    if (!tape.value(loss).is_scalar()) throw ContractError("loss must be scalar");
    auto adj = tape.gradient(loss, bm.params);
    return read_param_grads(tape, adj);
}

// --- serialization ---

using nlohmann::ordered_json;

std::string model_to_json(const MlpModel& model, const std::string& train_echo_json) {
    ordered_json j;
    j["format"] = 1;
    j["input_dim"] = model.input_dim;
    j["hidden"] = model.hidden;
    j["activation"] = to_string(model.activation);
    j["dropout"] = model.dropout;
    j["tau_cls"] = model.tau_cls;
    ordered_json layers = ordered_json::array();
    for (int l = 0; l < model.layer_count(); ++l) {
        ordered_json layer;
        layer["rows"] = model.weights[l].rows;
        layer["cols"] = model.weights[l].cols;
        layer["w"] = model.weights[l].a;  // row-major
        layer["b"] = model.biases[l].a;
        layers.push_back(std::move(layer));
    }
    j["layers"] = std::move(layers);
    if (!train_echo_json.empty()) j["train"] = ordered_json::parse(train_echo_json);
    return j.dump(2);
}

MlpModel model_from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    if (j.at("format").get<int>() != 1) throw ConfigError("unsupported model format");
    MlpModel m;
    m.input_dim = j.at("input_dim").get<int>();
    m.hidden = j.at("hidden").get<std::vector<int>>();
    m.activation = activation_from_string(j.at("activation").get<std::string>());
    m.dropout = j.at("dropout").get<double>();
    m.tau_cls = j.at("tau_cls").get<double>();
    for (const auto& layer : j.at("layers")) {
        const int r = layer.at("rows").get<int>(), c = layer.at("cols").get<int>();
        Matrix w(r, c, layer.at("w").get<std::vector<double>>());
        auto bvec = layer.at("b").get<std::vector<double>>();
        Matrix b(1, static_cast<int>(bvec.size()), std::move(bvec));
        m.weights.push_back(std::move(w));
        m.biases.push_back(std::move(b));
    }
    m.check_finite();
    return m;
}

void save_model(const MlpModel& model, const std::string& path,
                const std::string& train_echo_json) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write model file: " + path);
    out << model_to_json(model, train_echo_json) << "\n";
}

MlpModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read model file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace cec
