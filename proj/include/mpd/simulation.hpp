#pragma once

#include <map>
#include <string>

#include "mpd/inference.hpp"
#include "mpd/strategies.hpp"

namespace mpd {

// Complete feature table playing the role of the population: `truth` holds
// gold-standard feature vectors, `proxy` the cheap view with proxy values
// substituted at the expensive columns.
struct Superpopulation {
    Matrix truth;
    Matrix proxy;
    FeatureLayout layout;
    std::vector<std::string> columns;  // feature column names, length p
};

enum class OutcomeForm { literal, trt };

// Heteroskedastic synthetic population (z_cov, z_trt, y) with a logistic
// proxy for the treatment indicator.
Superpopulation synthetic_superpopulation(int n, std::uint64_t seed,
                                          OutcomeForm form = OutcomeForm::literal);

struct SuperpopSchema {
    std::vector<std::string> feature_cols;            // defines feature order
    std::map<std::string, std::string> proxy_cols;    // feature col -> proxy csv col
};

Superpopulation load_superpopulation(const std::string& path,
                                     const SuperpopSchema& schema);

// Unweighted M-estimate over all rows of the true feature table.
Vector oracle_estimand(const Superpopulation& superpop, const LossModel& loss);

struct ReplicationResult {
    Vector theta_mpd;
    std::vector<ConfidenceInterval> ci;  // one per coordinate
    std::vector<int> covered;
    int n_labelled = 0;
    double ci_width_j = 0.0;
    bool fallback = false;
    bool variance_clamped = false;
    // Sigma_MPD diagonals under the three tuning modes, for diagnostics.
    Vector var_diag_used, var_diag_identity, var_diag_zero;
};

struct SimConfig {
    StudyDesign design;
    StrategyConfig strategy;
    LossSpec loss_spec;
    OmegaMode omega_mode = OmegaMode::optimal;
    Matrix omega_const;  // used when omega_mode == constant
    double alpha = 0.10;
    int replications = 0;
    int parallel = 0;  // 0 = all cores
};

ReplicationResult run_replication(const Superpopulation& superpop,
                                  const SimConfig& config, const Vector& oracle_theta,
                                  std::uint64_t rep_index, bool baseline_arm);

struct StudyMetrics {
    double rmse = 0.0;
    double coverage = 0.0;
    double ess_ratio = 0.0;          // label-count adjusted
    double ess_ratio_unadjusted = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    int replications = 0;
    double baseline_rmse = 0.0;
    double baseline_coverage = 0.0;
    double mean_var_over_n = 0.0;    // mean Sigma_jj / N, calibration diagnostic
    double emp_var_theta = 0.0;      // empirical Var(theta_j)
    int fallback_count = 0;
};

StudyMetrics aggregate_metrics(const std::vector<ReplicationResult>& adaptive,
                               const std::vector<ReplicationResult>& baseline,
                               const Vector& oracle_theta, int j, int N);

struct StudyResult {
    Vector oracle_theta;
    std::vector<ReplicationResult> adaptive;
    std::vector<ReplicationResult> baseline;
    StudyMetrics metrics;
};

// Runs the paired adaptive-vs-baseline Monte Carlo study. Replications are
// distributed over threads; output is identical at any parallelism degree.
StudyResult run_study(const Superpopulation& superpop, const SimConfig& config);

}  // namespace mpd
