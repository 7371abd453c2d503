#include "cec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "cec/csv.hpp"
#include "cec/rng.hpp"

namespace cec {

using nlohmann::ordered_json;

std::string to_string(Variant v) {
    switch (v) {
        case Variant::PredOnly: return "pred_only";
        case Variant::PredEo: return "pred_eo";
        case Variant::PredCec: return "pred_cec";
        case Variant::Full: return "full";
    }
    return "?";
}

Variant variant_from_string(const std::string& s) {
    if (s == "pred_only") return Variant::PredOnly;
    if (s == "pred_eo") return Variant::PredEo;
    if (s == "pred_cec") return Variant::PredCec;
    if (s == "full") return Variant::Full;
    throw ConfigError("unknown variant: " + s + " (pred_only|pred_eo|pred_cec|full)");
}

void TrainConfig::validate() const {
    if (lambda_eo < 0.0 || lambda_cec < 0.0) throw ConfigError("lambdas must be >= 0");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (epochs <= 0 || batch_size <= 0 || ig_steps <= 0)
        throw ConfigError("epochs, batch_size and ig_steps must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    if (tau_cls <= 0.0 || tau_cls >= 1.0) throw ConfigError("tau_cls must be in (0, 1)");
    for (int h : hidden)
        if (h <= 0) throw ConfigError("hidden layer sizes must be positive");
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    TrainConfig c;
    c.lambda_eo = j.value("lambda_eo", c.lambda_eo);
    c.lambda_cec = j.value("lambda_cec", c.lambda_cec);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.ig_steps = j.value("ig_steps", c.ig_steps);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.seed = j.value("seed", c.seed);
    if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<int>>();
    if (j.contains("activation"))
        c.activation = activation_from_string(j.at("activation").get<std::string>());
    c.dropout = j.value("dropout", c.dropout);
    c.tau_cls = j.value("tau_cls", c.tau_cls);
    c.ig_dropout = j.value("ig_dropout", c.ig_dropout);
    c.validate();
    return c;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read train config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string TrainConfig::to_json() const {
    ordered_json j;
    j["lambda_eo"] = lambda_eo;
    j["lambda_cec"] = lambda_cec;
    j["learning_rate"] = learning_rate;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["ig_steps"] = ig_steps;
    j["adam_beta1"] = adam_beta1;
    j["adam_beta2"] = adam_beta2;
    j["adam_eps"] = adam_eps;
    j["seed"] = seed;
    j["variant"] = to_string(variant);
    j["hidden"] = hidden;
    j["activation"] = to_string(activation);
    j["dropout"] = dropout;
    j["tau_cls"] = tau_cls;
    j["ig_dropout"] = ig_dropout;
    return j.dump(2);
}

NodeId build_pred_loss(Tape& tape, const BoundModel& bm, const Matrix& X,
                       const std::vector<int>& y, const std::vector<NodeId>* dropout_masks) {
    if (X.rows == 0) throw ContractError("loss_pred: empty batch");
    NodeId logits = mlp_logits(tape, bm, tape.constant(X), dropout_masks);
    Matrix targets(X.rows, 1);
    for (int i = 0; i < X.rows; ++i) targets.a[i] = static_cast<double>(y[i]);
    NodeId per_row = tape.bce_logits(logits, tape.constant(std::move(targets)));
    return tape.scale(tape.sum_all(per_row), 1.0 / X.rows);
}

NodeId build_eo_loss(Tape& tape, const BoundModel& bm, const Matrix& X, const std::vector<int>& y,
                     const std::vector<int>& a, int* missing_cells) {
    if (X.rows == 0) throw ContractError("loss_eo: empty batch");
    NodeId scores = tape.sigmoid(mlp_logits(tape, bm, tape.constant(X)));

    // Soft rate per (y,a) cell: sum of masked sigmoid scores / cell count.
    NodeId rate[2][2];
    int count[2][2] = {{0, 0}, {0, 0}};
    for (int yy = 0; yy < 2; ++yy) {
        for (int aa = 0; aa < 2; ++aa) {
            Matrix mask(X.rows, 1);
            int c = 0;
            for (int i = 0; i < X.rows; ++i) {
                if (y[i] == yy && a[i] == aa) {
                    mask.a[i] = 1.0;
                    ++c;
                }
            }
            count[yy][aa] = c;
            rate[yy][aa] = c > 0
                ? tape.scale(tape.dot_all(tape.constant(std::move(mask)), scores), 1.0 / c)
                : kNoNode;
        }
    }

    NodeId loss = kNoNode;
    for (int yy = 0; yy < 2; ++yy) {  // yy=1: TPR gap, yy=0: FPR gap
        if (count[yy][0] > 0 && count[yy][1] > 0) {
            NodeId gap = tape.sub(rate[yy][0], rate[yy][1]);
            NodeId term = tape.mul(gap, gap);
            loss = loss == kNoNode ? term : tape.add(loss, term);
        } else if (missing_cells) {
            ++*missing_cells;
        }
    }
    return loss == kNoNode ? tape.scalar_constant(0.0) : loss;
}

NodeId build_cec_loss(Tape& tape, const BoundModel& bm, const Matrix& x, const Matrix& xcf,
                      const Matrix& baseline, int ig_steps,
                      const std::vector<NodeId>* ig_dropout_masks) {
    const int m = x.rows, D = x.cols;
    if (m == 0) throw ContractError("loss_cec: empty pair batch");
    Matrix inputs(2 * m, D), bases(2 * m, D);
    for (int t = 0; t < m; ++t) {
        std::memcpy(inputs.row_ptr(2 * t), x.row_ptr(t), D * sizeof(double));
        std::memcpy(inputs.row_ptr(2 * t + 1), xcf.row_ptr(t), D * sizeof(double));
        std::memcpy(bases.row_ptr(2 * t), baseline.row_ptr(t), D * sizeof(double));
        std::memcpy(bases.row_ptr(2 * t + 1), baseline.row_ptr(t), D * sizeof(double));
    }
    IgNodes ig = build_ig(tape, bm, inputs, bases, ig_steps, ig_dropout_masks);
    NodeId diff = tape.row_pair_diff(ig.normalized);       // m x D
    NodeId per_pair = tape.row_sums(tape.mul(diff, diff)); // ||.||^2, m x 1
    // (||diff|| / 2)^2 averaged over pairs
    return tape.scale(tape.sum_all(per_pair), 1.0 / (4.0 * m));
}

double loss_pred(const MlpModel& model, const Matrix& X, const std::vector<int>& y) {
    Tape tape;
    BoundModel bm = bind_model(tape, model, false);
    return tape.scalar_value(build_pred_loss(tape, bm, X, y));
}

double loss_eo(const MlpModel& model, const Matrix& X, const std::vector<int>& y,
               const std::vector<int>& a, int* missing_cells) {
    Tape tape;
    BoundModel bm = bind_model(tape, model, false);
    return tape.scalar_value(build_eo_loss(tape, bm, X, y, a, missing_cells));
}

double loss_cec(const MlpModel& model, const PairedDataset& batch, int ig_steps) {
    Tape tape;
    BoundModel bm = bind_model(tape, model, false);
    return tape.scalar_value(
        build_cec_loss(tape, bm, batch.x, batch.xcf, batch.baseline, ig_steps));
}

Vec64 grad_total_loss(const MlpModel& model, const Matrix& X, const std::vector<int>& y,
                      const std::vector<int>& a, const PairedDataset& pairs,
                      const TrainConfig& cfg, LossBreakdown* breakdown) {
    Tape tape;
    BoundModel bm = bind_model(tape, model, true);
    NodeId pred = build_pred_loss(tape, bm, X, y);
    NodeId total = pred;
    const double leo = cfg.effective_lambda_eo(), lcec = cfg.effective_lambda_cec();
    NodeId eo = kNoNode, cec = kNoNode;
    if (leo > 0.0) {
        eo = build_eo_loss(tape, bm, X, y, a);
        total = tape.add(total, tape.scale(eo, leo));
    }
    if (lcec > 0.0 && pairs.size() > 0) {
        cec = build_cec_loss(tape, bm, pairs.x, pairs.xcf, pairs.baseline, cfg.ig_steps);
        total = tape.add(total, tape.scale(cec, lcec));
    }
    Vec64 g = grad_params_of_scalar(tape, total, bm);
    if (breakdown) {
        breakdown->l_pred = tape.scalar_value(pred);
        breakdown->l_eo = eo == kNoNode ? 0.0 : tape.scalar_value(eo);
        breakdown->l_cec = cec == kNoNode ? 0.0 : tape.scalar_value(cec);
        breakdown->total = tape.scalar_value(total);
    }
    return g;
}

namespace {

struct Adam {
    Vec64 m, v;
    int t = 0;
    double beta1, beta2, eps, lr;

    Adam(size_t n, const TrainConfig& cfg)
        : m(n, 0.0), v(n, 0.0), beta1(cfg.adam_beta1), beta2(cfg.adam_beta2),
          eps(cfg.adam_eps), lr(cfg.learning_rate) {}

    void step(Vec64& params, const Vec64& grads) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, t);
        const double bc2 = 1.0 - std::pow(beta2, t);
        for (size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
            params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
};

std::vector<NodeId> draw_dropout_masks(Tape& tape, Rng& rng, const std::vector<int>& hidden,
                                       int rows, double p) {
    std::vector<NodeId> masks(hidden.size(), kNoNode);
    if (p <= 0.0) return masks;
    const double keep = 1.0 - p;
    for (size_t l = 0; l < hidden.size(); ++l) {
        Matrix m(rows, hidden[l]);
        for (auto& v : m.a) v = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
        masks[l] = tape.constant(std::move(m));
    }
    return masks;
}

}  // namespace

TrainResult train(const Dataset& data, const PairedDataset& train_pairs, const TrainConfig& cfg) {
    cfg.validate();
    std::vector<int> train_rows = data.train_idx;
    if (train_rows.empty()) {
        train_rows.resize(data.n());
        for (int i = 0; i < data.n(); ++i) train_rows[i] = i;
    }
    if (train_rows.empty()) throw ContractError("train: no training rows");

    const double leo = cfg.effective_lambda_eo();
    const double lcec = cfg.effective_lambda_cec();

    TrainResult result;
    result.model = make_mlp(data.model_dim(), cfg.hidden, cfg.activation, cfg.dropout,
                            derive_seed(cfg.seed, "train-init"));
    result.model.tau_cls = cfg.tau_cls;
    MlpModel& model = result.model;

    // Pair lookup: training row id -> index into train_pairs.
    std::unordered_map<int, int> pair_of_row;
    for (int t = 0; t < train_pairs.size(); ++t) pair_of_row.emplace(train_pairs.row_id[t], t);

    Rng rng_shuffle(derive_seed(cfg.seed, "train-shuffle"));
    Rng rng_dropout(derive_seed(cfg.seed, "train-dropout"));
    Rng rng_igdrop(derive_seed(cfg.seed, "train-ig-dropout"));

    Adam adam(model.param_count(), cfg);
    Vec64 params = model.flat_params();
    Vec64 checkpoint = params;  // last finite end-of-epoch state
    const int md = data.model_dim();

    std::vector<int> order = train_rows;
    Tape tape;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng_shuffle.shuffle(order);
        EpochStats stats;
        stats.epoch = epoch;
        int batches = 0;

        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const int bsz = static_cast<int>(
                std::min<size_t>(cfg.batch_size, order.size() - start));

            Matrix X(bsz, md);
            std::vector<int> by(bsz), ba(bsz);
            std::vector<int> batch_pairs;
            for (int i = 0; i < bsz; ++i) {
                const int row = order[start + i];
                const Vec64 v = data.model_input_row(row);
                std::memcpy(X.row_ptr(i), v.data(), md * sizeof(double));
                by[i] = data.y[row];
                ba[i] = data.a[row];
                auto it = pair_of_row.find(row);
                if (it != pair_of_row.end()) batch_pairs.push_back(it->second);
            }

            tape.clear();
            BoundModel bm = bind_model(tape, model, true);
            auto masks = draw_dropout_masks(tape, rng_dropout, cfg.hidden, bsz, cfg.dropout);
            NodeId l_pred = build_pred_loss(tape, bm, X, by, &masks);
            NodeId total = l_pred;
            NodeId l_eo = kNoNode, l_cec = kNoNode;

            if (leo > 0.0) {
                int missing = 0;
                l_eo = build_eo_loss(tape, bm, X, by, ba, &missing);
                if (missing > 0) ++stats.eo_missing_cell_batches;
                total = tape.add(total, tape.scale(l_eo, leo));
            }
            if (lcec > 0.0) {
                if (batch_pairs.empty()) {
                    ++stats.cec_empty_batches;  // contributes zero, flagged
                } else {
                    const int m = static_cast<int>(batch_pairs.size());
                    Matrix px(m, md), pcf(m, md), pb(m, md);
                    for (int t = 0; t < m; ++t) {
                        const int k = batch_pairs[t];
                        std::memcpy(px.row_ptr(t), train_pairs.x.row_ptr(k), md * sizeof(double));
                        std::memcpy(pcf.row_ptr(t), train_pairs.xcf.row_ptr(k),
                                    md * sizeof(double));
                        std::memcpy(pb.row_ptr(t), train_pairs.baseline.row_ptr(k),
                                    md * sizeof(double));
                    }
                    std::vector<NodeId> ig_masks;
                    const std::vector<NodeId>* ig_masks_ptr = nullptr;
                    if (cfg.ig_dropout && cfg.dropout > 0.0) {
                        ig_masks = draw_dropout_masks(tape, rng_igdrop, cfg.hidden,
                                                      2 * m * cfg.ig_steps, cfg.dropout);
                        ig_masks_ptr = &ig_masks;
                    }
                    l_cec = build_cec_loss(tape, bm, px, pcf, pb, cfg.ig_steps, ig_masks_ptr);
                    total = tape.add(total, tape.scale(l_cec, lcec));
                }
            }

            const double total_v = tape.scalar_value(total);
            Vec64 grads;
            if (std::isfinite(total_v)) grads = grad_params_of_scalar(tape, total, bm);
            // Saturated activations can push a finite loss to non-finite
            // gradients; both count as divergence.
            if (!std::isfinite(total_v) || !all_finite(grads)) {
                model.set_flat_params(checkpoint);
                result.diverged = true;
                result.completed_epochs = epoch - 1;
                return result;
            }
            adam.step(params, grads);
            model.set_flat_params(params);

            stats.mean.l_pred += tape.scalar_value(l_pred);
            stats.mean.l_eo += l_eo == kNoNode ? 0.0 : tape.scalar_value(l_eo);
            stats.mean.l_cec += l_cec == kNoNode ? 0.0 : tape.scalar_value(l_cec);
            stats.mean.total += total_v;
            ++batches;
        }

        stats.mean.l_pred /= batches;
        stats.mean.l_eo /= batches;
        stats.mean.l_cec /= batches;
        stats.mean.total /= batches;
        result.history.push_back(stats);
        result.completed_epochs = epoch;
        checkpoint = params;
    }
    return result;
}

void save_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : history) {
        rows.push_back({std::to_string(e.epoch), csv::format_double(e.mean.l_pred),
                        csv::format_double(e.mean.l_eo), csv::format_double(e.mean.l_cec),
                        csv::format_double(e.mean.total)});
    }
    csv::write_file(path, {"epoch", "l_pred", "l_eo", "l_cec", "total"}, rows);
}

}  // namespace cec
