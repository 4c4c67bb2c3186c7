// vldg: train and evaluate domain-generalization strategies for
// vision-language classifiers, plus reporting and synthetic-data tooling.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "vldg/checkpoint.hpp"
#include "vldg/config.hpp"
#include "vldg/protocol.hpp"
#include "vldg/report.hpp"

namespace fs = std::filesystem;
using namespace vldg;

namespace {

struct CommonArgs {
    std::string config_path;
    FlagOverrides flags;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "Path to the JSON config file");
    if (config_required) opt->required();
    cmd->add_option("--out", args.flags.out_dir, "Output directory (overrides output.dir)");
    cmd->add_option("--strategy", args.flags.strategy,
                    "erm | linear_probe | zero_shot | naive_mm | cooplvt");
    cmd->add_option("--target", args.flags.target, "Target domain name");
    cmd->add_option("--seeds", args.flags.seeds_csv, "Comma-separated trial seeds");
    cmd->add_option("--steps", args.flags.steps, "Training steps per run");
    cmd->add_option("--b", args.flags.b, "Per-domain batch size");
    cmd->add_option("--lr", args.flags.lr, "Learning rate");
    cmd->add_option("--prompt-family", args.flags.prompt_family, "I | II | custom");
    cmd->add_option("--np", args.flags.n_p, "Number of injected prompt tokens");
    cmd->add_option("--mlp-layers", args.flags.mlp_layers, "Conditioner MLP depth");
    cmd->add_option("--workers", args.flags.workers, "Parallel run workers");
    cmd->add_flag("--overwrite", args.flags.overwrite,
                  "Allow writing into a non-empty output directory");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
    return validate_config(apply_overrides(read_config_file(args.config_path), args.flags));
}

/// Refuses to clobber earlier results unless --overwrite was given.
void guard_output_dir(const ExperimentConfig& cfg, const std::vector<std::string>& markers) {
    if (cfg.output.overwrite) return;
    for (const std::string& m : markers) {
        const fs::path p = fs::path(cfg.output.dir) / m;
        bool occupied = fs::exists(p);
        if (occupied && fs::is_directory(p)) occupied = !fs::is_empty(p);
        if (occupied)
            throw ConfigError("output directory " + cfg.output.dir + " already contains " + m +
                              "; pass --overwrite to replace it");
    }
}

void print_done(const std::string& what, const std::string& where) {
    std::cout << what << " written to " << where << "\n";
}

int cmd_train(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    if (cfg.target_domain.empty())
        throw ConfigError("train: set experiment.target_domain or pass --target");
    guard_output_dir(cfg, {"runs", "checkpoints"});

    std::vector<DomainDataset> base = load_domains(cfg);
    const TaskLabels task = task_from_domains(base);
    const int k = static_cast<int>(task.names.size());

    std::vector<std::string> sources = cfg.source_domains;
    if (sources.empty()) {
        for (const DomainDataset& d : base)
            if (d.name() != cfg.target_domain) sources.push_back(d.name());
    }

    const std::string run_dir = cfg.output.dir + "/runs";
    const std::string ckpt_dir = cfg.output.dir + "/checkpoints";
    for (std::uint64_t seed : cfg.trial_seeds) {
        detail::TrialDomains td = detail::clone_with_log(base);
        auto find = [&](const std::string& name) -> DomainDataset& {
            for (DomainDataset& d : td.all)
                if (d.name() == name) return d;
            throw ConfigError("domain \"" + name + "\" is not configured");
        };
        DomainDataset& target = find(cfg.target_domain);
        std::vector<DomainDataset> src_sets;
        for (const std::string& s : sources) src_sets.push_back(find(s));

        const std::string tag =
            "target=" + cfg.target_domain + "/seed=" + std::to_string(seed);
        TrialResult trial = run_single_trial(cfg, task, src_sets, seed, *td.log, tag);
        td.log->set_phase("test/" + tag);
        Metrics m = evaluate_model_on_domain(trial.model, target);
        detail::assert_isolation(*td.log, {cfg.target_domain}, tag);

        RunRecord rec;
        rec.mode = "multi_source";
        rec.target = cfg.target_domain;
        rec.seed = seed;
        rec.selected_step = trial.selected_step;
        rec.metrics = m;
        rec.val_history = trial.val_history;
        write_json_file_atomic(
            run_dir + "/run-" + cfg.target_domain + "-seed" + std::to_string(seed) + ".json",
            run_record_to_json(rec, cfg, k));
        save_checkpoint(trial.snapshots[static_cast<size_t>(trial.selected_index)],
                        ckpt_dir + "/ckpt-" + cfg.target_domain + "-seed" +
                            std::to_string(seed) + ".json");
        std::cout << "seed " << seed << ": selected step " << trial.selected_step
                  << ", target macro-F1 " << m.macro_f1 << "\n";
    }
    print_done("runs and checkpoints", cfg.output.dir);
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path) {
    ExperimentConfig cfg = resolve_config(args);
    if (cfg.target_domain.empty())
        throw ConfigError("eval: set experiment.target_domain or pass --target");
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    if (ckpt.strategy != strategy_name(cfg.strategy))
        throw ConfigError("checkpoint was trained with strategy " + ckpt.strategy +
                          ", config says " + strategy_name(cfg.strategy));

    std::vector<DomainDataset> base = load_domains(cfg);
    const TaskLabels task = task_from_domains(base);
    Model model = build_model(cfg, task, cfg.trial_seeds.front());
    model.restore(ckpt);

    for (const DomainDataset& d : base) {
        if (d.name() != cfg.target_domain) continue;
        Metrics m = evaluate_model_on_domain(model, d);
        Json out{{"target", d.name()},
                 {"checkpoint", checkpoint_path},
                 {"selected_step", ckpt.step},
                 {"metrics", metrics_to_json(m)}};
        std::cout << out.dump(1) << "\n";
        return 0;
    }
    throw ConfigError("domain \"" + cfg.target_domain + "\" is not configured");
}

int cmd_zero_shot(const CommonArgs& args, const std::string& families_csv) {
    ExperimentConfig cfg = resolve_config(args);
    guard_output_dir(cfg, {"zero_shot.json"});

    std::vector<PromptFamily> families;
    {
        std::string cur;
        for (char c : families_csv + ",") {
            if (c == ',') {
                if (!cur.empty()) families.push_back(prompt_family_from_name(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
    }
    if (families.empty()) families = {cfg.prompt_family};

    std::vector<DomainDataset> base = load_domains(cfg);
    const TaskLabels task = task_from_domains(base);

    Json domains = Json::object();
    for (const DomainDataset& d : base) domains[d.name()] = Json::object();
    for (PromptFamily fam : families) {
        ExperimentConfig fam_cfg = cfg;
        fam_cfg.strategy = Strategy::ZeroShot;
        fam_cfg.prompt_family = fam;
        Model model = build_model(fam_cfg, task, cfg.trial_seeds.front());
        for (const DomainDataset& d : base) {
            Metrics m = evaluate_model_on_domain(model, d);
            domains[d.name()][prompt_family_name(fam)] = metrics_to_json(m);
        }
    }
    Json out{{"format", "vldg-zero-shot-v1"},
             {"config_hash", cfg.config_hash()},
             {"config", cfg.resolved()},
             {"families", [&] {
                  std::vector<std::string> names;
                  for (PromptFamily f : families) names.push_back(prompt_family_name(f));
                  return names;
              }()},
             {"domains", domains}};
    write_json_file_atomic(cfg.output.dir + "/zero_shot.json", out);
    for (const DomainDataset& d : base) {
        std::cout << d.name() << ":";
        for (PromptFamily fam : families) {
            const std::string fname = prompt_family_name(fam);
            std::cout << "  " << fname << " macro-F1 "
                      << domains[d.name()][fname]["macro_f1"].get<double>();
        }
        std::cout << "\n";
    }
    print_done("zero-shot metrics", cfg.output.dir + "/zero_shot.json");
    return 0;
}

int cmd_matrix(const CommonArgs& args, bool single_source) {
    ExperimentConfig cfg = resolve_config(args);
    guard_output_dir(cfg, {"runs", "report.json", "report.csv"});
    const std::string run_dir = cfg.output.dir + "/runs";
    if (cfg.output.overwrite && fs::exists(run_dir)) fs::remove_all(run_dir);
    MultiSourceResult result = single_source ? run_single_source(cfg, run_dir)
                                             : run_multi_source(cfg, run_dir);
    assemble_report(run_dir, cfg.output.dir);
    std::cout << result.training_runs << " training runs over " << result.domains.size()
              << " domains\n";
    print_done("report", cfg.output.dir);
    return 0;
}

int cmd_report(const CommonArgs& args, const std::string& runs_dir_flag) {
    ExperimentConfig cfg = resolve_config(args);
    const std::string run_dir =
        runs_dir_flag.empty() ? cfg.output.dir + "/runs" : runs_dir_flag;
    ReportTable table = assemble_report(run_dir, cfg.output.dir);
    std::cout << render_csv(table);
    print_done("report", cfg.output.dir);
    return 0;
}

int cmd_synth_data(const CommonArgs& args) {
    ExperimentConfig cfg = resolve_config(args);
    if (!cfg.data.synth) throw ConfigError("synth-data: config has no data.synth block");
    guard_output_dir(cfg, {synth_domain_name(0)});
    materialize_synth(*cfg.data.synth, cfg.data.synth_seed, cfg.output.dir);
    std::cout << cfg.data.synth->n_domains << " domains materialized\n";
    print_done("synthetic dataset", cfg.output.dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Domain-generalization trainer for vision-language classifiers"};
    app.require_subcommand(1);

    CommonArgs train_args, eval_args, zs_args, ms_args, ss_args, rep_args, synth_args;
    std::string checkpoint_path, families_csv, runs_dir;

    CLI::App* train = app.add_subcommand("train", "Train one target with the config seeds");
    add_common(train, train_args);

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a saved checkpoint on a domain");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file to evaluate")
        ->required();

    CLI::App* zs = app.add_subcommand("zero-shot", "Zero-shot metrics per prompt family");
    add_common(zs, zs_args);
    zs->add_option("--families", families_csv,
                   "Comma-separated prompt families (default: config family)");

    CLI::App* ms = app.add_subcommand("multi-source", "Leave-one-domain-out matrix");
    add_common(ms, ms_args);

    CLI::App* ss = app.add_subcommand("single-source", "One source, tested on the rest");
    add_common(ss, ss_args);

    CLI::App* rep = app.add_subcommand("report", "Re-render tables from run files");
    add_common(rep, rep_args);
    rep->add_option("--runs", runs_dir, "Run-file directory (default: <out>/runs)");

    CLI::App* synth = app.add_subcommand("synth-data", "Materialize the synthetic dataset");
    add_common(synth, synth_args);

    try {
        app.parse(argc, argv);
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) return cmd_eval(eval_args, checkpoint_path);
        if (zs->parsed()) return cmd_zero_shot(zs_args, families_csv);
        if (ms->parsed()) return cmd_matrix(ms_args, false);
        if (ss->parsed()) return cmd_matrix(ss_args, true);
        if (rep->parsed()) return cmd_report(rep_args, runs_dir);
        if (synth->parsed()) return cmd_synth_data(synth_args);
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
