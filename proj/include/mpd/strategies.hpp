#pragma once

#include <unordered_map>

#include "mpd/estimators.hpp"
#include "mpd/loss.hpp"
#include "mpd/sampling.hpp"

namespace mpd {

// Cartesian product of per-column breakpoint vectors; each listed column is
// binned by its breakpoints and the bin tuple identifies the stratum.
struct StrataSpec {
    std::vector<int> cols;
    std::vector<std::vector<double>> breakpoints;

    int stratum_count() const {
        int n = 1;
        for (const auto& b : breakpoints) n *= static_cast<int>(b.size()) + 1;
        return n;
    }
    int stratum_of(const Vector& cheap) const;
};

struct StrategyConfig {
    enum class Kind { uniform, greedy_knn, greedy_stratified };
    Kind kind = Kind::uniform;
    int k_neighbors = 20;
    StrataSpec strata;
    int target_coordinate = 0;  // j
};

// Constant explore rule n_targ_1/N.
LabelRule uniform_rule(double n_targ_1, int N, double b_targ);

struct InterimFit {
    Vector theta_interim;
    Matrix H_interim;
    // squared influence-gap estimates for units labelled before wave k*
    std::unordered_map<int, double> psi_values;
};

// Partial-wave weighted fit through waves 1..k*-1 and the per-unit squared
// influence-function gaps Y_i.
InterimFit interim_fit(const LossModel& loss, const ObservedStudy& study,
                       int k_star, const Vector& gamma_I,
                       const Matrix& H_gamma_inv, int j);

// Brute-force kNN regressor on z-scored features.
class KnnRho {
public:
    KnnRho(Matrix train_features, std::vector<double> responses,
           std::vector<int> ids, int k_neighbors);
    double operator()(const Vector& query) const;

private:
    Matrix z_;  // standardized training features
    std::vector<double> responses_;
    std::vector<int> ids_;
    Vector mean_, scale_;
    int k_;
};

// Piecewise-constant rho over strata, plug-in Neyman-style estimator.
class StratifiedRho {
public:
    StratifiedRho(const StrataSpec& spec, const ObservedStudy& study, int k_star,
                  const std::unordered_map<int, double>& psi_values);
    double operator()(const Vector& query) const;

private:
    StrataSpec spec_;
    std::vector<double> rho_;
};

// x -> sqrt(max(rho(x), eps)) * prod_{k<k*} (1 - pi^(k)(x))^(-1/2).
std::function<double(const Vector&)> greedy_init_rule(
    std::function<double(const Vector&)> rho_hat,
    std::vector<LabelRule> prior_rules);

// Normalize-trim-rebalance: scales intensities to the wave budget, clamps
// into [b_targ, 1-b_targ] and rebalances so the sum hits the budget exactly.
struct TrimTransform {
    double scale = 1.0;
    double b = 0.0;
    int branch = 0;  // 0 = pass, 1 = shrink toward b, 2 = stretch toward 1-b
    double alpha = 1.0;
    double apply(double intensity) const;
};

TrimTransform fit_trim_transform(const std::vector<double>& intensities,
                                 double n_targ_k, double b_targ);

std::vector<double> enforce_budget_overlap(const std::vector<double>& intensities,
                                           double n_targ_k, double b_targ);

// Builds the wave-k* labelling rule from history. Wave 1 is the uniform
// explore rule; later waves run the greedy pipeline for greedy kinds or a
// constant-intensity budget rule for the uniform kind. On interim-fit
// failure falls back to uniform on the remaining budget and sets *fallback.
LabelRule build_wave_rule(const LossModel& loss, const StrategyConfig& config,
                          const ObservedStudy& study, int k_star,
                          const std::vector<LabelRule>& prior_rules,
                          const Vector& gamma_I, const Matrix& H_gamma,
                          bool* fallback = nullptr);

}  // namespace mpd
