// Command-line front end: synth -> match -> train -> audit with directory
// handoff between stages, plus sweep / compare / pipeline conveniences.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "cec/manifest.hpp"
#include "cec/pipeline.hpp"
#include "cec/rng.hpp"

namespace fs = std::filesystem;
using namespace cec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonTrainFlags {
    std::string config_path;
    std::string variant;
    double lambda_eo = -1.0, lambda_cec = -1.0;
    int ig_steps = -1;
    int epochs = -1;
    int64_t seed = -1;

    TrainConfig resolve() const {
        TrainConfig cfg = config_path.empty() ? TrainConfig{}
                                              : TrainConfig::from_json_file(config_path);
        if (!variant.empty()) cfg.variant = variant_from_string(variant);
        if (lambda_eo >= 0.0) cfg.lambda_eo = lambda_eo;
        if (lambda_cec >= 0.0) cfg.lambda_cec = lambda_cec;
        if (ig_steps > 0) cfg.ig_steps = ig_steps;
        if (epochs > 0) cfg.epochs = epochs;
        if (seed >= 0) cfg.seed = static_cast<uint64_t>(seed);
        cfg.validate();
        return cfg;
    }
};

void add_train_flags(CLI::App* cmd, CommonTrainFlags& flags) {
    cmd->add_option("--config", flags.config_path, "training config JSON");
    cmd->add_option("--variant", flags.variant, "pred_only|pred_eo|pred_cec|full");
    cmd->add_option("--lambda-eo", flags.lambda_eo, "equalized-odds weight");
    cmd->add_option("--lambda-cec", flags.lambda_cec, "explanation-consistency weight");
    cmd->add_option("--ig-steps", flags.ig_steps, "IG integration steps for the loss");
    cmd->add_option("--epochs", flags.epochs, "training epochs");
    cmd->add_option("--seed", flags.seed, "root seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cecaudit: train and audit tabular classifiers for hidden procedural bias"};
    app.require_subcommand(1);

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark dataset");
    std::string synth_config, synth_out;
    int64_t synth_seed = -1;
    synth->add_option("--config", synth_config, "synthetic config JSON");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--seed", synth_seed, "root seed (overrides config)");

    // --- match ---
    auto* match_cmd = app.add_subcommand("match", "label-stratified counterfactual matching");
    std::string match_data, match_out;
    double match_tau = 0.0;
    match_cmd->add_option("--data", match_data, "dataset directory")->required();
    match_cmd->add_option("--tau-dist", match_tau, "match distance threshold (0 disables)");
    match_cmd->add_option("--out", match_out, "output directory")->required();

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "train a model under the joint objective");
    std::string train_data, train_match, train_out;
    CommonTrainFlags train_flags;
    bool train_sweep = false;
    double train_theta = 0.5;
    int sweep_audit_steps = 32;
    train_cmd->add_option("--data", train_data, "dataset directory")->required();
    train_cmd->add_option("--match", train_match, "match directory")->required();
    train_cmd->add_option("--out", train_out, "output directory")->required();
    add_train_flags(train_cmd, train_flags);
    train_cmd->add_flag("--sweep", train_sweep, "run the 6x6 lambda grid instead");
    train_cmd->add_option("--theta-regime", train_theta, "regime threshold for sweep audits");
    train_cmd->add_option("--sweep-audit-steps", sweep_audit_steps,
                          "IG steps for sweep-cell audits");

    // --- audit ---
    auto* audit_cmd = app.add_subcommand("audit", "emit the fairness audit report");
    std::string audit_model, audit_data, audit_match, audit_out, audit_split = "test";
    AuditConfig audit_cfg;
    audit_cmd->add_option("--model", audit_model, "model.json path")->required();
    audit_cmd->add_option("--data", audit_data, "dataset directory")->required();
    audit_cmd->add_option("--match", audit_match, "match directory")->required();
    audit_cmd->add_option("--out", audit_out, "output directory")->required();
    audit_cmd->add_option("--theta-regime", audit_cfg.theta_regime, "regime threshold");
    audit_cmd->add_option("--ig-steps", audit_cfg.ig_steps, "IG steps for audit attributions");
    audit_cmd->add_option("--split", audit_split, "test|train|all");
    audit_cmd->add_flag("--dump-attributions", audit_cfg.dump_attributions,
                        "emit per-feature attribution CSV");

    // --- compare ---
    auto* compare_cmd = app.add_subcommand("compare", "Pareto flags across audit reports");
    std::vector<std::string> compare_reports, compare_names;
    std::string compare_out;
    compare_cmd->add_option("--report", compare_reports, "audit.json paths")->required();
    compare_cmd->add_option("--name", compare_names, "run names (parallel to --report)");
    compare_cmd->add_option("--out", compare_out, "output directory")->required();

    // --- pipeline ---
    auto* pipe_cmd = app.add_subcommand("pipeline", "synth -> match -> train -> audit");
    std::string pipe_config, pipe_out;
    CommonTrainFlags pipe_flags;
    double pipe_tau = 0.0, pipe_theta = 0.5;
    int pipe_audit_steps = 128;
    pipe_cmd->add_option("--synth-config", pipe_config, "synthetic config JSON");
    pipe_cmd->add_option("--out", pipe_out, "pipeline root directory")->required();
    add_train_flags(pipe_cmd, pipe_flags);
    pipe_cmd->add_option("--tau-dist", pipe_tau, "match distance threshold");
    pipe_cmd->add_option("--theta-regime", pipe_theta, "regime threshold");
    pipe_cmd->add_option("--audit-ig-steps", pipe_audit_steps, "IG steps for the audit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*synth) {
            SyntheticConfig cfg = synth_config.empty()
                                      ? SyntheticConfig{}
                                      : SyntheticConfig::from_json_file(synth_config);
            if (synth_seed >= 0) cfg.seed = static_cast<uint64_t>(synth_seed);
            stage_synth(cfg, synth_out);
            std::cout << "wrote dataset to " << synth_out << "\n";
        } else if (*match_cmd) {
            stage_match(match_data, match_tau, match_out);
            std::cout << "wrote counterfactual map to " << match_out << "\n";
        } else if (*train_cmd) {
            TrainConfig cfg = train_flags.resolve();
            if (train_sweep) {
                AuditConfig ac;
                ac.theta_regime = train_theta;
                ac.ig_steps = sweep_audit_steps;
                stage_sweep(train_data, train_match, cfg, ac, default_sweep_grid(), train_out);
                std::cout << "wrote sweep grid to " << train_out << "\n";
            } else {
                TrainStage stage = stage_train(train_data, train_match, cfg, train_out);
                std::cout << "wrote model to " << train_out << "\n";
                if (stage.diverged) {
                    std::cerr << "training diverged; last finite checkpoint saved\n";
                    return kExitNumeric;
                }
            }
        } else if (*audit_cmd) {
            audit_cfg.split = audit_split;
            stage_audit(audit_model, audit_data, audit_match, audit_cfg, audit_out);
            std::cout << "wrote audit report to " << audit_out << "\n";
        } else if (*compare_cmd) {
            stage_compare(compare_reports, compare_names, compare_out);
            std::cout << "wrote comparison to " << compare_out << "\n";
        } else if (*pipe_cmd) {
            TrainConfig cfg = pipe_flags.resolve();
            SyntheticConfig scfg = pipe_config.empty()
                                       ? SyntheticConfig{}
                                       : SyntheticConfig::from_json_file(pipe_config);
            scfg.seed = cfg.seed;  // one root seed drives every stage
            const fs::path root(pipe_out);
            stage_synth(scfg, (root / "data").string());
            stage_match((root / "data").string(), pipe_tau, (root / "match").string());
            TrainStage stage = stage_train((root / "data").string(), (root / "match").string(),
                                           cfg, (root / "train").string());
            AuditConfig ac;
            ac.theta_regime = pipe_theta;
            ac.ig_steps = pipe_audit_steps;
            stage_audit((root / "train" / "model.json").string(), (root / "data").string(),
                        (root / "match").string(), ac, (root / "audit").string());
            std::cout << "pipeline complete under " << pipe_out << "\n";
            if (stage.diverged) return kExitNumeric;
        }
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitOk;
}
