#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctopt/pipeline.hpp"

namespace {

struct CommonOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string method = "both";
    std::vector<std::string> stages;
};

ctopt::RunConfig load_config(const CommonOptions& opts) {
    ctopt::RunConfig cfg = ctopt::RunConfig::from_file(opts.config_path);
    if (opts.seed) {
        cfg.seed = *opts.seed;
    }
    if (opts.threads) {
        cfg.threads = *opts.threads;
    }
    if (!opts.out_dir.empty()) {
        cfg.out_dir = opts.out_dir;
    }
    return cfg;
}

void add_common_flags(CLI::App* cmd, CommonOptions& opts, bool with_method) {
    cmd->add_option("--config", opts.config_path, "Run configuration JSON")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_dir, "Output directory (overrides config)");
    cmd->add_option("--seed", opts.seed, "Master seed (overrides config)");
    cmd->add_option("--threads", opts.threads, "Worker thread cap (overrides config)");
    if (with_method) {
        cmd->add_option("--method", opts.method, "Selection method")
            ->check(CLI::IsMember({"gru", "greedy", "both"}));
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cone-beam CT scan-trajectory optimization pipeline"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::string running_stage = "startup";

    auto* simulate = app.add_subcommand("simulate", "Phantom, trajectories and projections");
    add_common_flags(simulate, opts, false);
    auto* completeness =
        app.add_subcommand("completeness", "Hemisphere sampling and completeness matrices");
    add_common_flags(completeness, opts, false);
    auto* metrics = app.add_subcommand("metrics", "Alpha filter and per-candidate metrics");
    add_common_flags(metrics, opts, false);
    auto* optimize = app.add_subcommand("optimize", "GRU and/or greedy selection");
    add_common_flags(optimize, opts, true);
    auto* reconstruct = app.add_subcommand("reconstruct", "ART reconstructions");
    add_common_flags(reconstruct, opts, false);
    auto* evaluate = app.add_subcommand("evaluate", "Quality report against the reference");
    add_common_flags(evaluate, opts, false);
    auto* pipeline = app.add_subcommand("pipeline", "All stages end to end");
    add_common_flags(pipeline, opts, true);
    pipeline->add_option("--stages", opts.stages,
                         "Subset of stages to run (default: all, canonical order)")
        ->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        const ctopt::RunConfig cfg = load_config(opts);
        const std::filesystem::path out = cfg.out_dir;
        const ctopt::SelectMethod method = ctopt::select_method_from_string(opts.method);

        if (simulate->parsed()) {
            running_stage = "simulate";
            ctopt::stage_simulate(cfg, out);
        } else if (completeness->parsed()) {
            running_stage = "completeness";
            ctopt::stage_completeness(cfg, out);
        } else if (metrics->parsed()) {
            running_stage = "metrics";
            ctopt::stage_metrics(cfg, out);
        } else if (optimize->parsed()) {
            running_stage = "optimize";
            ctopt::stage_optimize(cfg, out, method);
        } else if (reconstruct->parsed()) {
            running_stage = "reconstruct";
            ctopt::stage_reconstruct(cfg, out);
        } else if (evaluate->parsed()) {
            running_stage = "evaluate";
            ctopt::stage_evaluate(cfg, out);
        } else if (pipeline->parsed()) {
            running_stage = "pipeline";
            ctopt::run_pipeline(cfg, out, opts.stages, method);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s: %s\n", running_stage.c_str(), e.what());
        return 1;
    }
    return 0;
}
