#include "cec/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cec/csv.hpp"
#include "cec/manifest.hpp"

namespace cec {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string path_in(const std::string& dir, const char* name) {
    return (fs::path(dir) / name).string();
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void stage_synth(const SyntheticConfig& config, const std::string& out_dir) {
    RunManifest manifest;
    manifest.command = "synth";
    manifest.seed = config.seed;
    manifest.started_at = utc_timestamp();
    manifest.config_hash = fnv1a64_hex(config.to_json());

    Dataset d = generate_synthetic(config);
    auto [train_idx, test_idx] = make_split(d.n(), config.test_fraction, config.seed);
    d.train_idx = train_idx;
    d.test_idx = test_idx;
    if (!d.train_idx.empty()) d = standardize(d, d.train_idx);
    save_dataset(d, out_dir);

    manifest.dataset_hash = file_hash_hex(path_in(out_dir, "dataset.csv"));
    manifest.outputs = {"dataset.csv", "meta.json"};
    manifest.finished_at = utc_timestamp();
    write_manifest(manifest, out_dir);
}

void stage_match(const std::string& data_dir, double tau_dist, const std::string& out_dir) {
    RunManifest manifest;
    manifest.command = "match";
    manifest.started_at = utc_timestamp();
    manifest.inputs["data"] = data_dir;
    manifest.input_hashes["data"] = file_hash_hex(path_in(data_dir, "dataset.csv"));

    Dataset d = load_dataset(data_dir);
    PartitionIndex index = build_index(d);
    CounterfactualMap map = match(index, d, tau_dist);
    BaselineSet baselines = compute_baselines(d);

    fs::create_directories(out_dir);
    save_map_csv(map, path_in(out_dir, "map.csv"));
    save_baselines_json(baselines, path_in(out_dir, "baselines.json"));
    {
        ordered_json meta;
        meta["tau_dist"] = tau_dist;
        meta["coverage"] = map.coverage;
        meta["warnings"] = index.warnings;
        std::ofstream out(path_in(out_dir, "match_meta.json"));
        out << meta.dump(2) << "\n";
    }

    manifest.dataset_hash = manifest.input_hashes["data"];
    manifest.config_hash = fnv1a64_hex("tau_dist=" + csv::format_double(tau_dist));
    manifest.outputs = {"map.csv", "baselines.json", "match_meta.json"};
    manifest.finished_at = utc_timestamp();
    write_manifest(manifest, out_dir);
}

TrainStage stage_train(const std::string& data_dir, const std::string& match_dir,
                       const TrainConfig& config, const std::string& out_dir) {
    RunManifest manifest;
    manifest.command = "train";
    manifest.seed = config.seed;
    manifest.started_at = utc_timestamp();
    manifest.inputs["data"] = data_dir;
    manifest.inputs["match"] = match_dir;
    manifest.input_hashes["data"] = file_hash_hex(path_in(data_dir, "dataset.csv"));
    manifest.input_hashes["match"] = file_hash_hex(path_in(match_dir, "map.csv"));
    manifest.config_hash = fnv1a64_hex(config.to_json());

    Dataset d = load_dataset(data_dir);
    CounterfactualMap map = load_map_csv(path_in(match_dir, "map.csv"));
    BaselineSet baselines = load_baselines_json(path_in(match_dir, "baselines.json"));
    PairedDataset train_pairs = pair(d, map, baselines, d.train_idx.empty() ? nullptr
                                                                            : &d.train_idx);

    TrainResult result = train(d, train_pairs, config);

    fs::create_directories(out_dir);
    ordered_json echo = ordered_json::parse(config.to_json());
    save_model(result.model, path_in(out_dir, "model.json"), echo.dump());
    save_history_csv(result.history, path_in(out_dir, "history.csv"));

    manifest.dataset_hash = manifest.input_hashes["data"];
    manifest.outputs = {"model.json", "history.csv"};
    manifest.finished_at = utc_timestamp();
    write_manifest(manifest, out_dir);

    TrainStage stage;
    stage.model = std::move(result.model);
    stage.history = std::move(result.history);
    stage.diverged = result.diverged;
    return stage;
}

AuditReport stage_audit(const std::string& model_path, const std::string& data_dir,
                        const std::string& match_dir, const AuditConfig& config,
                        const std::string& out_dir) {
    RunManifest manifest;
    manifest.command = "audit";
    manifest.started_at = utc_timestamp();
    manifest.inputs["model"] = model_path;
    manifest.inputs["data"] = data_dir;
    manifest.inputs["match"] = match_dir;
    manifest.input_hashes["model"] = file_hash_hex(model_path);
    manifest.input_hashes["data"] = file_hash_hex(path_in(data_dir, "dataset.csv"));
    manifest.input_hashes["match"] = file_hash_hex(path_in(match_dir, "map.csv"));

    MlpModel model = load_model(model_path);
    Dataset d = load_dataset(data_dir);
    CounterfactualMap map = load_map_csv(path_in(match_dir, "map.csv"));
    BaselineSet baselines = load_baselines_json(path_in(match_dir, "baselines.json"));

    // carry the training echo (seeds, lambdas, T) into the report
    std::string train_echo;
    {
        nlohmann::json mj = nlohmann::json::parse(read_text(model_path));
        if (mj.contains("train")) train_echo = mj.at("train").dump();
    }

    AuditReport report = run_audit(model, d, map, baselines, config, train_echo);
    save_audit(report, d, out_dir);

    manifest.dataset_hash = manifest.input_hashes["data"];
    manifest.outputs = {"audit.json", "per_instance.csv", "predictions.csv",
                        "regime_distribution.csv"};
    if (config.dump_attributions) manifest.outputs.push_back("attributions.csv");
    manifest.finished_at = utc_timestamp();
    write_manifest(manifest, out_dir);
    return report;
}

std::vector<double> default_sweep_grid() { return {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}; }

std::vector<SweepCell> stage_sweep(const std::string& data_dir, const std::string& match_dir,
                                   const TrainConfig& base, const AuditConfig& audit_config,
                                   const std::vector<double>& grid, const std::string& out_dir) {
    RunManifest manifest;
    manifest.command = "sweep";
    manifest.seed = base.seed;
    manifest.started_at = utc_timestamp();
    manifest.inputs["data"] = data_dir;
    manifest.inputs["match"] = match_dir;
    manifest.input_hashes["data"] = file_hash_hex(path_in(data_dir, "dataset.csv"));
    manifest.input_hashes["match"] = file_hash_hex(path_in(match_dir, "map.csv"));
    manifest.config_hash = fnv1a64_hex(base.to_json());

    Dataset d = load_dataset(data_dir);
    CounterfactualMap map = load_map_csv(path_in(match_dir, "map.csv"));
    BaselineSet baselines = load_baselines_json(path_in(match_dir, "baselines.json"));
    PairedDataset train_pairs = pair(d, map, baselines, d.train_idx.empty() ? nullptr
                                                                            : &d.train_idx);

    std::vector<SweepCell> cells;
    for (double leo : grid) {
        for (double lcec : grid) {
            TrainConfig cfg = base;
            cfg.variant = Variant::Full;
            cfg.lambda_eo = leo;
            cfg.lambda_cec = lcec;
            TrainResult r = train(d, train_pairs, cfg);

            AuditReport report = run_audit(r.model, d, map, baselines, audit_config);
            SweepCell cell;
            cell.lambda_eo = leo;
            cell.lambda_cec = lcec;
            cell.f1 = report.outcome.f1;
            cell.auc = report.outcome.auc.value_or(0.0);
            cell.eo_gap = report.outcome.eo_gap.value_or(0.0);
            cell.sp_gap = report.outcome.sp_gap.value_or(0.0);
            cell.cec = report.cec.mean;
            cell.pfr = report.pfr_value;
            cell.regime_fraction = report.regimes.fraction;
            cells.push_back(cell);
        }
    }

    fs::create_directories(out_dir);
    std::vector<std::vector<std::string>> rows;
    for (const auto& c : cells) {
        rows.push_back({csv::format_double(c.lambda_eo), csv::format_double(c.lambda_cec),
                        csv::format_double(c.f1), csv::format_double(c.auc),
                        csv::format_double(c.eo_gap), csv::format_double(c.sp_gap),
                        csv::format_double(c.cec), csv::format_double(c.pfr),
                        csv::format_double(c.regime_fraction[0]),
                        csv::format_double(c.regime_fraction[1]),
                        csv::format_double(c.regime_fraction[2]),
                        csv::format_double(c.regime_fraction[3])});
    }
    csv::write_file(path_in(out_dir, "sweep.csv"),
                    {"lambda_eo", "lambda_cec", "f1", "auc", "eo_gap", "sp_gap", "cec", "pfr",
                     "frac_a", "frac_b", "frac_c", "frac_d"},
                    rows);

    manifest.dataset_hash = manifest.input_hashes["data"];
    manifest.outputs = {"sweep.csv"};
    manifest.finished_at = utc_timestamp();
    write_manifest(manifest, out_dir);
    return cells;
}

void stage_compare(const std::vector<std::string>& report_paths,
                   const std::vector<std::string>& names, const std::string& out_dir) {
    if (report_paths.empty()) throw ConfigError("compare: no reports given");
    RunManifest manifest;
    manifest.command = "compare";
    manifest.started_at = utc_timestamp();

    std::vector<RunSummary> runs;
    for (size_t i = 0; i < report_paths.size(); ++i) {
        const std::string name = i < names.size() ? names[i] : "run" + std::to_string(i);
        manifest.inputs[name] = report_paths[i];
        manifest.input_hashes[name] = file_hash_hex(report_paths[i]);
        runs.push_back(summarize_audit_json(report_paths[i], name));
    }
    save_comparison(runs, out_dir);

    manifest.outputs = {"pareto.csv", "pfr_cec.csv", "regime_by_run.csv"};
    manifest.finished_at = utc_timestamp();
    write_manifest(manifest, out_dir);
}

}  // namespace cec
