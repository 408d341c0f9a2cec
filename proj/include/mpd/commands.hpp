#pragma once

#include <optional>
#include <string>

#include "mpd/config.hpp"

namespace mpd {

struct SimulateOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> reps;
    std::optional<int> parallel;
    bool force = false;
};

// Writes replications.csv, summary.csv and manifest.json into out_dir.
int cmd_simulate(const SimulateOptions& opts);

// Serialized study output, exposed for determinism checks.
std::string replications_csv_text(const StudyResult& result, int target_coordinate);
std::string summary_csv_text(const StudyResult& result, const SimConfig& config);

struct EstimateOptions {
    std::string data_path;
    std::string weights_path;  // exactly one of weights/trace
    std::string trace_path;
    std::string loss_config_path;  // JSON: loss + features/proxies (+ optional c)
    double alpha = 0.10;
};

// One-shot estimation on a real study; writes theta, variance diagonal and
// CIs as CSV to stdout.
int cmd_estimate(const EstimateOptions& opts);

struct GenDataOptions {
    std::string kind = "synthetic";
    int n = 0;
    std::uint64_t seed = 0;
    std::string out_path;
    std::string outcome_form = "literal";
};

int cmd_gen_data(const GenDataOptions& opts);

// Re-derives the summary table from a run directory's replications.csv and
// manifest, printing it to stdout.
int cmd_report(const std::string& run_dir);

}  // namespace mpd
