#include "cec/audit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cec/attribution.hpp"
#include "cec/csv.hpp"

namespace cec {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::vector<int> eval_rows_for(const Dataset& d, const std::string& split) {
    if (split == "all" || (!d.has_split() && split == "test")) {
        std::vector<int> rows(d.n());
        for (int i = 0; i < d.n(); ++i) rows[i] = i;
        return rows;
    }
    if (split == "test") {
        if (d.test_idx.empty()) throw ConfigError("audit: dataset has no test split");
        return d.test_idx;
    }
    if (split == "train") {
        if (d.train_idx.empty()) throw ConfigError("audit: dataset has no train split");
        return d.train_idx;
    }
    throw ConfigError("audit: unknown split '" + split + "' (test|train|all)");
}

ordered_json regime_json(const RegimeAssignment& r) {
    ordered_json j;
    j["theta"] = r.theta;
    j["fraction"] = {{"A", r.fraction[0]}, {"B", r.fraction[1]}, {"C", r.fraction[2]},
                     {"D", r.fraction[3]}};
    j["count"] = {{"A", r.count[0]}, {"B", r.count[1]}, {"C", r.count[2]}, {"D", r.count[3]}};
    return j;
}

}  // namespace

AuditReport run_audit(const MlpModel& model, const Dataset& d, const CounterfactualMap& map,
                      const BaselineSet& baselines, const AuditConfig& config,
                      const std::string& train_echo_json) {
    AuditReport r;
    r.config = config;
    r.train_echo_json = train_echo_json;

    r.eval_rows = eval_rows_for(d, config.split);
    r.n_eval_rows = static_cast<int>(r.eval_rows.size());
    r.outcome = outcome_metrics(model, d, r.eval_rows);
    r.scores = predict_scores(model, d.model_inputs(r.eval_rows));
    r.yhat.resize(r.eval_rows.size());
    for (size_t i = 0; i < r.eval_rows.size(); ++i)
        r.yhat[i] = r.scores[i] >= model.tau_cls ? 1 : 0;

    PairedDataset pairs = pair(d, map, baselines, &r.eval_rows);
    r.n_pairs = pairs.size();
    r.n_unmatched = pairs.n_unmatched;
    const int total = r.n_pairs + r.n_unmatched;
    r.coverage = total > 0 ? static_cast<double>(r.n_pairs) / total : 0.0;
    if (pairs.size() == 0) throw ContractError("audit: no matched pairs in the evaluation split");

    r.cec = population_cec(model, pairs, config.ig_steps);

    const Vec64 sx = predict_scores(model, pairs.x);
    const Vec64 scf = predict_scores(model, pairs.xcf);
    std::vector<char> consistent(pairs.size());
    r.yhat_x.resize(pairs.size());
    r.yhat_cf.resize(pairs.size());
    for (int i = 0; i < pairs.size(); ++i) {
        r.yhat_x[i] = sx[i] >= model.tau_cls ? 1 : 0;
        r.yhat_cf[i] = scf[i] >= model.tau_cls ? 1 : 0;
        consistent[i] = r.yhat_x[i] == r.yhat_cf[i] ? 1 : 0;
    }

    r.regimes = assign_regimes_from(r.cec.per_pair, consistent, config.theta_regime);
    for (double theta : config.theta_sensitivity) {
        r.regime_sensitivity.push_back(assign_regimes_from(r.cec.per_pair, consistent, theta));
    }

    // PFR and the regime split count flips over the identical pair set; the
    // fraction identity frac(C)+frac(D) == PFR is enforced, not assumed.
    long flips = 0;
    for (char c : consistent) flips += c ? 0 : 1;
    if (flips != r.regimes.flips())
        throw NumericError("audit: flip count disagrees with regime C+D count");
    r.pfr_value = static_cast<double>(flips) / pairs.size();

    r.row_id = pairs.row_id;
    r.dstar = pairs.dist;

    if (config.dump_attributions) {
        const int D = pairs.x.cols;
        r.att_raw_x = Matrix(pairs.size(), D);
        r.att_norm_x = Matrix(pairs.size(), D);
        r.att_raw_cf = Matrix(pairs.size(), D);
        r.att_norm_cf = Matrix(pairs.size(), D);
        for (int k = 0; k < pairs.size(); ++k) {
            Vec64 x(pairs.x.row_ptr(k), pairs.x.row_ptr(k) + D);
            Vec64 xcf(pairs.xcf.row_ptr(k), pairs.xcf.row_ptr(k) + D);
            Vec64 b(pairs.baseline.row_ptr(k), pairs.baseline.row_ptr(k) + D);
            auto [ax, acf] = pair_attributions(model, x, xcf, b, config.ig_steps);
            for (int j = 0; j < D; ++j) {
                r.att_raw_x.at(k, j) = ax.raw[j];
                r.att_norm_x.at(k, j) = ax.normalized[j];
                r.att_raw_cf.at(k, j) = acf.raw[j];
                r.att_norm_cf.at(k, j) = acf.normalized[j];
            }
        }
    }

    // match-distance histogram over the evaluation pairs
    double dmax = 0.0;
    for (double v : pairs.dist) dmax = std::max(dmax, v);
    const int bins = std::max(1, config.histogram_bins);
    r.hist_counts.assign(bins, 0);
    r.hist_edges.resize(bins + 1);
    const double width = dmax > 0 ? dmax / bins : 1.0;
    for (int b = 0; b <= bins; ++b) r.hist_edges[b] = b * width;
    for (double v : pairs.dist) {
        int b = dmax > 0 ? std::min(bins - 1, static_cast<int>(v / width)) : 0;
        ++r.hist_counts[b];
    }
    return r;
}

std::string audit_to_json(const AuditReport& r) {
    ordered_json j;
    ordered_json cfg;
    cfg["split"] = r.config.split;
    cfg["ig_steps"] = r.config.ig_steps;
    cfg["theta_regime"] = r.config.theta_regime;
    cfg["theta_sensitivity"] = r.config.theta_sensitivity;
    if (!r.train_echo_json.empty()) cfg["train"] = ordered_json::parse(r.train_echo_json);
    j["config"] = std::move(cfg);

    ordered_json counts;
    counts["eval_rows"] = r.n_eval_rows;
    counts["matched_pairs"] = r.n_pairs;
    counts["unmatched"] = r.n_unmatched;
    counts["coverage"] = r.coverage;
    counts["degenerate_pairs"] = r.cec.n_degenerate;
    j["counts"] = std::move(counts);

    ordered_json outcome;
    if (r.outcome.auc) outcome["auc"] = *r.outcome.auc;
    else outcome["auc"] = nullptr;
    outcome["f1"] = r.outcome.f1;
    if (r.outcome.eo_gap) outcome["eo_gap"] = *r.outcome.eo_gap;
    else outcome["eo_gap"] = nullptr;
    if (r.outcome.sp_gap) outcome["sp_gap"] = *r.outcome.sp_gap;
    else outcome["sp_gap"] = nullptr;
    ordered_json conf;
    for (int g = 0; g < 2; ++g) {
        const auto& c = r.outcome.confusion[g];
        conf["group_" + std::to_string(g)] = {
            {"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
    }
    outcome["confusion"] = std::move(conf);
    outcome["flags"] = r.outcome.flags;
    j["outcome"] = std::move(outcome);

    ordered_json proc;
    proc["population_cec"] = r.cec.mean;
    proc["population_cec_nondegenerate"] = r.cec.mean_nondegenerate;
    proc["pfr"] = r.pfr_value;
    proc["regimes"] = regime_json(r.regimes);
    ordered_json sens = ordered_json::array();
    for (const auto& ra : r.regime_sensitivity) sens.push_back(regime_json(ra));
    proc["regime_sensitivity"] = std::move(sens);
    j["procedural"] = std::move(proc);

    ordered_json hist;
    hist["edges"] = r.hist_edges;
    hist["counts"] = r.hist_counts;
    j["match_distance_histogram"] = std::move(hist);
    return j.dump(2);
}

void save_audit(const AuditReport& r, const Dataset& d, const std::string& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "audit.json");
        if (!out) throw ConfigError("cannot write audit.json in: " + dir);
        out << audit_to_json(r) << "\n";
    }
    {
        // Pinned leading columns (row_id, yhat_x, yhat_cf, delta_cec, regime,
        // dstar); extra columns keep every aggregate recomputable.
        std::vector<std::vector<std::string>> rows;
        for (size_t k = 0; k < r.row_id.size(); ++k) {
            const int row = r.row_id[k];
            rows.push_back({std::to_string(row), std::to_string(r.yhat_x[k]),
                            std::to_string(r.yhat_cf[k]), csv::format_double(r.cec.per_pair[k]),
                            std::string(1, regime_letter(r.regimes.regime[k])),
                            csv::format_double(r.dstar[k]), std::to_string(d.y[row]),
                            std::to_string(d.a[row]),
                            std::to_string(static_cast<int>(r.cec.degenerate_flag[k]))});
        }
        csv::write_file((fs::path(dir) / "per_instance.csv").string(),
                        {"row_id", "yhat_x", "yhat_cf", "delta_cec", "regime", "dstar", "y", "a",
                         "degenerate"},
                        rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        for (size_t k = 0; k < r.eval_rows.size(); ++k) {
            const int row = r.eval_rows[k];
            rows.push_back({std::to_string(row), std::to_string(d.y[row]),
                            std::to_string(d.a[row]), csv::format_double(r.scores[k]),
                            std::to_string(r.yhat[k])});
        }
        csv::write_file((fs::path(dir) / "predictions.csv").string(),
                        {"row_id", "y", "a", "score", "yhat"}, rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& ra : r.regime_sensitivity) {
            rows.push_back({csv::format_double(ra.theta), csv::format_double(ra.fraction[0]),
                            csv::format_double(ra.fraction[1]), csv::format_double(ra.fraction[2]),
                            csv::format_double(ra.fraction[3])});
        }
        csv::write_file((fs::path(dir) / "regime_distribution.csv").string(),
                        {"theta", "frac_a", "frac_b", "frac_c", "frac_d"}, rows);
    }
    if (r.config.dump_attributions && r.att_raw_x.rows > 0) {
        // Long format for external plotting: one row per (pair, side, feature).
        std::vector<std::string> names = d.schema.feature_names;
        names.push_back(d.schema.protected_name);
        std::vector<std::vector<std::string>> rows;
        for (size_t k = 0; k < r.row_id.size(); ++k) {
            for (int j = 0; j < r.att_raw_x.cols; ++j) {
                const int kk = static_cast<int>(k);
                rows.push_back({std::to_string(r.row_id[k]), "x", names[j],
                                csv::format_double(r.att_raw_x.at(kk, j)),
                                csv::format_double(r.att_norm_x.at(kk, j))});
                rows.push_back({std::to_string(r.row_id[k]), "cf", names[j],
                                csv::format_double(r.att_raw_cf.at(kk, j)),
                                csv::format_double(r.att_norm_cf.at(kk, j))});
            }
        }
        csv::write_file((fs::path(dir) / "attributions.csv").string(),
                        {"row_id", "side", "feature", "raw", "normalized"}, rows);
    }
}

RunSummary summarize_audit_json(const std::string& path, const std::string& name) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read audit report: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    RunSummary s;
    s.name = name;
    s.f1 = j.at("outcome").at("f1").get<double>();
    if (!j.at("outcome").at("eo_gap").is_null())
        s.eo_gap = j.at("outcome").at("eo_gap").get<double>();
    s.cec = j.at("procedural").at("population_cec").get<double>();
    s.pfr = j.at("procedural").at("pfr").get<double>();
    const auto& f = j.at("procedural").at("regimes").at("fraction");
    s.regime_fraction = {f.at("A").get<double>(), f.at("B").get<double>(),
                         f.at("C").get<double>(), f.at("D").get<double>()};
    return s;
}

void save_comparison(const std::vector<RunSummary>& runs, const std::string& dir) {
    if (runs.empty()) throw ConfigError("compare: no runs given");
    fs::create_directories(dir);

    std::vector<RunPoint> points;
    for (const auto& r : runs) points.push_back({r.f1, r.eo_gap, r.cec});
    const auto flags = pareto_nondominated(points);

    {
        std::vector<std::vector<std::string>> rows;
        for (size_t i = 0; i < runs.size(); ++i) {
            rows.push_back({runs[i].name, csv::format_double(runs[i].f1),
                            csv::format_double(runs[i].eo_gap), csv::format_double(runs[i].cec),
                            flags[i] ? "1" : "0"});
        }
        csv::write_file((fs::path(dir) / "pareto.csv").string(),
                        {"run", "f1", "eo_gap", "cec", "nondominated"}, rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : runs)
            rows.push_back({r.name, csv::format_double(r.pfr), csv::format_double(r.cec)});
        csv::write_file((fs::path(dir) / "pfr_cec.csv").string(), {"run", "pfr", "cec"}, rows);
    }
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : runs) {
            rows.push_back({r.name, csv::format_double(r.regime_fraction[0]),
                            csv::format_double(r.regime_fraction[1]),
                            csv::format_double(r.regime_fraction[2]),
                            csv::format_double(r.regime_fraction[3])});
        }
        csv::write_file((fs::path(dir) / "regime_by_run.csv").string(),
                        {"run", "frac_a", "frac_b", "frac_c", "frac_d"}, rows);
    }
}

}  // namespace cec
