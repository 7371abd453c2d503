#include "cec/attribution.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <thread>

namespace cec {

namespace {

// CEC_AUDIT_THREADS caps audit-side fan-out; results land in disjoint
// per-pair slots, so the output is identical for any thread count.
int audit_thread_cap() {
    const char* env = std::getenv("CEC_AUDIT_THREADS");
    if (!env) return 1;
    const int n = std::atoi(env);
    return n > 0 ? n : 1;
}

}  // namespace

IgNodes build_ig(Tape& tape, const BoundModel& bm, const Matrix& inputs,
                 const Matrix& baselines, int steps, const std::vector<NodeId>* dropout_masks) {
    if (steps < 1) throw ContractError("integrated gradients: steps must be >= 1");
    if (!inputs.same_shape(baselines))
        throw ContractError("integrated gradients: input/baseline shape mismatch");
    const int P = inputs.rows, D = inputs.cols;

    // Interpolation points b + alpha_t (x - b), alpha_t = (t - 1/2) / T,
    // stacked per input. The points carry no parameter dependence; gradients
    // flow through the network evaluations only.
    Matrix interp(P * steps, D);
    for (int p = 0; p < P; ++p) {
        const double* x = inputs.row_ptr(p);
        const double* b = baselines.row_ptr(p);
        for (int t = 0; t < steps; ++t) {
            const double alpha = (t + 0.5) / steps;
            double* row = interp.row_ptr(p * steps + t);
            for (int j = 0; j < D; ++j) row[j] = b[j] + alpha * (x[j] - b[j]);
        }
    }

    NodeId X = tape.leaf(std::move(interp), true);
    NodeId logits = mlp_logits(tape, bm, X, dropout_masks);
    NodeId total = tape.sum_all(logits);
    // Rows are independent, so d(sum)/dX row t is the input-gradient at that
    // interpolation point. The sweep is recorded on the tape and stays
    // differentiable with respect to the parameters.
    NodeId dX = tape.gradient(total, std::vector<NodeId>{X})[0];

    NodeId path_mean = tape.block_mean_rows(dX, steps);

    Matrix coef(P, D);
    for (int p = 0; p < P; ++p) {
        const double* x = inputs.row_ptr(p);
        const double* b = baselines.row_ptr(p);
        double* row = coef.row_ptr(p);
        for (int j = 0; j < D; ++j) row[j] = x[j] - b[j];
    }
    NodeId raw = tape.mul(path_mean, tape.constant(std::move(coef)));

    NodeId norms = tape.sqrt(tape.row_sums(tape.mul(raw, raw)));
    NodeId denom = tape.add(norms, tape.constant(Matrix::full(P, 1, kNormEps)));
    NodeId normalized = tape.div(raw, tape.broadcast_cols(denom, D));
    return {raw, normalized};
}

namespace {

Attribution make_attribution(const Tape& tape, const IgNodes& ig, int row, const Vec64& baseline,
                             int steps) {
    const Matrix& raw = tape.value(ig.raw);
    const Matrix& norm = tape.value(ig.normalized);
    Attribution a;
    a.raw.assign(raw.row_ptr(row), raw.row_ptr(row) + raw.cols);
    a.normalized.assign(norm.row_ptr(row), norm.row_ptr(row) + norm.cols);
    a.baseline = baseline;
    a.steps = steps;
    a.degenerate = l2_norm(a.raw) < kDegenerateNorm;
    return a;
}

}  // namespace

Attribution integrated_gradients(const MlpModel& model, const Vec64& x, const Vec64& b,
                                 int steps) {
    require_finite(x, "integrated_gradients input");
    require_finite(b, "integrated_gradients baseline");
    if (x.size() != b.size()) throw ContractError("integrated_gradients: dim mismatch");
    Tape tape;
    BoundModel bm = bind_model(tape, model, false);
    IgNodes ig = build_ig(tape, bm, Matrix::row(x), Matrix::row(b), steps);
    return make_attribution(tape, ig, 0, b, steps);
}

std::pair<Attribution, Attribution> pair_attributions(const MlpModel& model, const Vec64& x,
                                                      const Vec64& x_cf, const Vec64& b, int steps,
                                                      const BaselineSet* check, int y, int a) {
    if (check) {
        const Vec64& expected = check->get(y, a);
        if (expected.size() != b.size() ||
            std::memcmp(expected.data(), b.data(), b.size() * sizeof(double)) != 0) {
            throw ContractError(
                "pair_attributions: baseline does not match the factual's label-group baseline");
        }
    }
    if (x.size() != x_cf.size()) throw ContractError("pair_attributions: dim mismatch");
    Tape tape;
    BoundModel bm = bind_model(tape, model, false);
    Matrix inputs(2, static_cast<int>(x.size()));
    std::memcpy(inputs.row_ptr(0), x.data(), x.size() * sizeof(double));
    std::memcpy(inputs.row_ptr(1), x_cf.data(), x.size() * sizeof(double));
    Matrix bases(2, static_cast<int>(b.size()));
    std::memcpy(bases.row_ptr(0), b.data(), b.size() * sizeof(double));
    std::memcpy(bases.row_ptr(1), b.data(), b.size() * sizeof(double));
    IgNodes ig = build_ig(tape, bm, inputs, bases, steps);
    return {make_attribution(tape, ig, 0, b, steps), make_attribution(tape, ig, 1, b, steps)};
}

double cec_from_normalized(const Vec64& gx, const Vec64& gcf) {
    if (gx.size() != gcf.size()) throw ContractError("cec score: dim mismatch");
    double s = 0.0;
    for (size_t j = 0; j < gx.size(); ++j) {
        const double diff = gx[j] - gcf[j];
        s += diff * diff;
    }
    return std::sqrt(s) / 2.0;
}

CecScore cec_score(const Attribution& attr_x, const Attribution& attr_cf) {
    CecScore c;
    c.score = cec_from_normalized(attr_x.normalized, attr_cf.normalized);
    c.raw_distance = 2.0 * c.score;
    return c;
}

PopulationCec population_cec(const MlpModel& model, const PairedDataset& pairs, int steps) {
    if (pairs.size() == 0)
        throw ContractError("population_cec: zero matched pairs");

    PopulationCec out;
    out.n_pairs = pairs.size();
    out.n_unmatched = pairs.n_unmatched;
    out.per_pair.resize(pairs.size());
    out.degenerate_flag.assign(pairs.size(), 0);

    const int D = pairs.x.cols;
    constexpr int kChunk = 128;  // pairs per tape, keeps node payloads modest
    const int n_chunks = (pairs.size() + kChunk - 1) / kChunk;

    std::atomic<int> degenerate_count{0};
    auto process_chunk = [&](int chunk) {
        const int begin = chunk * kChunk;
        const int m = std::min(kChunk, pairs.size() - begin);
        Matrix inputs(2 * m, D), bases(2 * m, D);
        for (int t = 0; t < m; ++t) {
            std::memcpy(inputs.row_ptr(2 * t), pairs.x.row_ptr(begin + t), D * sizeof(double));
            std::memcpy(inputs.row_ptr(2 * t + 1), pairs.xcf.row_ptr(begin + t),
                        D * sizeof(double));
            std::memcpy(bases.row_ptr(2 * t), pairs.baseline.row_ptr(begin + t),
                        D * sizeof(double));
            std::memcpy(bases.row_ptr(2 * t + 1), pairs.baseline.row_ptr(begin + t),
                        D * sizeof(double));
        }
        Tape tape;
        BoundModel bm = bind_model(tape, model, false);
        IgNodes ig = build_ig(tape, bm, inputs, bases, steps);
        const Matrix& raw = tape.value(ig.raw);
        const Matrix& norm = tape.value(ig.normalized);
        for (int t = 0; t < m; ++t) {
            double d2 = 0.0;
            const double* gx = norm.row_ptr(2 * t);
            const double* gc = norm.row_ptr(2 * t + 1);
            for (int j = 0; j < D; ++j) {
                const double diff = gx[j] - gc[j];
                d2 += diff * diff;
            }
            out.per_pair[begin + t] = std::sqrt(d2) / 2.0;
            double nx = 0.0, nc = 0.0;
            for (int j = 0; j < D; ++j) {
                nx += raw.at(2 * t, j) * raw.at(2 * t, j);
                nc += raw.at(2 * t + 1, j) * raw.at(2 * t + 1, j);
            }
            if (std::sqrt(nx) < kDegenerateNorm || std::sqrt(nc) < kDegenerateNorm) {
                out.degenerate_flag[begin + t] = 1;
                degenerate_count.fetch_add(1, std::memory_order_relaxed);
            }
        }
    };

    const int threads = std::min(audit_thread_cap(), n_chunks);
    if (threads <= 1) {
        for (int c = 0; c < n_chunks; ++c) process_chunk(c);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (int c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1))
                    process_chunk(c);
            });
        }
        for (auto& th : pool) th.join();
    }
    out.n_degenerate = degenerate_count.load();

    double sum = 0.0, sum_nd = 0.0;
    for (int t = 0; t < pairs.size(); ++t) {
        sum += out.per_pair[t];
        if (!out.degenerate_flag[t]) sum_nd += out.per_pair[t];
    }
    out.mean = sum / pairs.size();
    const int nd = pairs.size() - out.n_degenerate;
    out.mean_nondegenerate = nd > 0 ? sum_nd / nd : 0.0;
    return out;
}

}  // namespace cec
