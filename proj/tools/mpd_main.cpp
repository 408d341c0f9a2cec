#include <exception>
#include <iostream>

#include "CLI11.hpp"
#include "mpd/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Multiwave adaptive sampling: simulation and estimation"};
    app.require_subcommand(1);

    mpd::SimulateOptions sim;
    std::uint64_t seed_override = 0;
    int reps_override = 0, parallel_override = 0;
    CLI::App* simulate = app.add_subcommand("simulate", "Run a paired Monte Carlo study");
    simulate->add_option("--config", sim.config_path, "Run configuration (JSON)")
        ->required();
    simulate->add_option("--out", sim.out_dir, "Output directory")->required();
    auto* opt_seed = simulate->add_option("--seed", seed_override, "Override master seed");
    auto* opt_reps = simulate->add_option("--reps", reps_override, "Override replication count");
    auto* opt_par =
        simulate->add_option("--parallel", parallel_override, "Worker threads (0 = all cores)");
    simulate->add_flag("--force", sim.force, "Overwrite an existing run directory");

    mpd::EstimateOptions est;
    CLI::App* estimate = app.add_subcommand("estimate", "One-shot estimate on collected data");
    estimate->add_option("--data", est.data_path, "Unit feature table (CSV)")->required();
    estimate->add_option("--weights", est.weights_path, "Per-unit aggregated weights (CSV)");
    estimate->add_option("--trace", est.trace_path, "Per-wave sampling trace (CSV)");
    estimate->add_option("--loss-config", est.loss_config_path, "Loss and schema (JSON)")
        ->required();
    estimate->add_option("--alpha", est.alpha, "CI miscoverage level");

    mpd::GenDataOptions gen;
    CLI::App* gen_data = app.add_subcommand("gen-data", "Write a synthetic feature table");
    gen_data->add_option("--kind", gen.kind, "Generator kind");
    gen_data->add_option("--n", gen.n, "Row count")->required();
    gen_data->add_option("--seed", gen.seed, "Generator seed");
    gen_data->add_option("--out", gen.out_path, "Output CSV path")->required();
    gen_data->add_option("--outcome-form", gen.outcome_form, "Outcome formula variant");

    std::string run_dir;
    CLI::App* report = app.add_subcommand("report", "Re-derive the summary from a run directory");
    report->add_option("--run", run_dir, "Run directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*simulate) {
            if (*opt_seed) sim.seed = seed_override;
            if (*opt_reps) sim.reps = reps_override;
            if (*opt_par) sim.parallel = parallel_override;
            return mpd::cmd_simulate(sim);
        }
        if (*estimate) return mpd::cmd_estimate(est);
        if (*gen_data) return mpd::cmd_gen_data(gen);
        if (*report) return mpd::cmd_report(run_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
