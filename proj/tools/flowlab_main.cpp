#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "flowlab/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitNumerical = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool force = false;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Experiment config file");
    cmd->add_option("--out", args.out_dir, "Output directory (overrides config)");
    cmd->add_option("--seed", args.seed, "Master seed (overrides config)")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_flag("--force", args.force, "Overwrite existing stage outputs");
    cmd->add_option("--threads", args.threads, "Worker threads (evaluation only)");
}

flowlab::ExperimentConfig resolve_config(const CommonArgs& args) {
    flowlab::ExperimentConfig cfg =
        args.config_path.empty() ? flowlab::default_config() : flowlab::load_config(args.config_path);
    if (args.seed_set) cfg.seed = args.seed;
    if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
    cfg.validate();
    return cfg;
}

flowlab::RunPaths paths_of(const flowlab::ExperimentConfig& cfg) {
    return flowlab::RunPaths{cfg.output_dir};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-step distillation laboratory for conditioned flow-matching models"};
    app.require_subcommand(1);

    CommonArgs args;
    int steps = 4;
    std::size_t n = 16;
    int round = 1;
    std::string axis = "t_sampler";
    std::string sample_out;

    CLI::App* c_schema = app.add_subcommand("schema", "Print the config schema with defaults");
    CLI::App* c_teacher = app.add_subcommand("train-teacher", "Flow-matching teacher training");
    CLI::App* c_ccd = app.add_subcommand("distill-ccd", "Continuous-time consistency distillation");
    CLI::App* c_dcd = app.add_subcommand("distill-dcd", "Discrete two-point baseline distillation");
    CLI::App* c_da = app.add_subcommand("align-da", "Adversarial distribution alignment");
    CLI::App* c_ta = app.add_subcommand("align-ta", "Preference-based trajectory alignment");
    CLI::App* c_sample = app.add_subcommand("sample", "Few-step sampling from the latest model");
    CLI::App* c_eval = app.add_subcommand("eval", "Evaluate every checkpoint in the run directory");
    CLI::App* c_sweep = app.add_subcommand("sweep", "Fréchet metric across inference step counts");
    CLI::App* c_ablate = app.add_subcommand("ablate", "Single-axis ablation study");
    CLI::App* c_export = app.add_subcommand("export-plotdata", "Tidy CSV export of run metrics");

    for (CLI::App* c : {c_teacher, c_ccd, c_dcd, c_da, c_ta, c_sample, c_eval, c_sweep, c_ablate,
                        c_export}) {
        add_common(c, args);
    }
    c_ta->add_option("--round", round, "Alignment round (1 or 2)");
    c_sample->add_option("--steps", steps, "Euler steps");
    c_sample->add_option("--n", n, "Number of samples");
    c_sample->add_option("--out-file", sample_out, "Sample container path");
    c_ablate->add_option("--axis", axis, "Ablation axis: t_sampler or distill");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_schema->parsed()) {
            std::cout << flowlab::config_schema_text();
            return kExitOk;
        }
        flowlab::ExperimentConfig cfg = resolve_config(args);
        flowlab::RunPaths paths = paths_of(cfg);
        if (c_teacher->parsed()) {
            flowlab::stage_train_teacher(cfg, paths, args.force);
        } else if (c_ccd->parsed()) {
            flowlab::stage_distill_ccd(cfg, paths, args.force);
        } else if (c_dcd->parsed()) {
            flowlab::stage_distill_dcd(cfg, paths, args.force);
        } else if (c_da->parsed()) {
            flowlab::stage_align_da(cfg, paths, args.force);
        } else if (c_ta->parsed()) {
            flowlab::stage_align_ta(cfg, paths, round, args.force);
        } else if (c_sample->parsed()) {
            if (sample_out.empty()) {
                sample_out = paths.dir + "/samples_" + std::to_string(steps) + "step.ckpt";
            }
            flowlab::stage_sample(cfg, paths, steps, n, sample_out, args.force);
            std::cout << sample_out << "\n";
        } else if (c_eval->parsed()) {
            std::cout << flowlab::stage_eval(cfg, paths).dump(2) << "\n";
        } else if (c_sweep->parsed()) {
            std::cout << flowlab::stage_sweep(cfg, paths).dump(2) << "\n";
        } else if (c_ablate->parsed()) {
            std::cout << flowlab::stage_ablate(cfg, paths, axis).dump(2) << "\n";
        } else if (c_export->parsed()) {
            flowlab::export_plotdata(paths);
        }
    } catch (const flowlab::MissingPrerequisiteError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissing;
    } catch (const flowlab::OutputExistsError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const flowlab::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}
