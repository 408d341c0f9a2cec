#pragma once

#include <optional>

#include "mpd/loss.hpp"
#include "mpd/types.hpp"

namespace mpd {

struct SolveOptions {
    double tol = 1e-8;   // max-norm of the normalized weighted score
    int max_iter = 100;
};

struct FitDiagnostics {
    int iterations = 0;
    double grad_norm = 0.0;
};

// Weighted empirical risk minimizer over the given feature rows.
// n_norm is the divisor of the score equation (N of the full study); it
// does not change the argmin, only the reported gradient norm.
Vector solve_weighted_m(const LossModel& loss, const Matrix& rows,
                        const Vector& weights, double n_norm,
                        std::optional<Vector> init = std::nullopt,
                        const SolveOptions& opts = {},
                        FitDiagnostics* diag = nullptr);

struct ComponentEstimates {
    Vector theta_II;   // weighted fit on true features of labelled units
    Vector gamma_II;   // weighted fit on proxy features
    Vector gamma_I;    // unweighted fit on proxy features, all units
    FitDiagnostics diag_theta_II, diag_gamma_II, diag_gamma_I;
};

ComponentEstimates fit_components(const LossModel& loss, const ObservedStudy& study,
                                  const SolveOptions& opts = {});

enum class OmegaMode { identity, zero, optimal, constant };

struct TuningMatrix {
    Matrix omega;
    OmegaMode mode = OmegaMode::identity;
};

// theta_MPD = Omega gamma_I + (theta_II - Omega gamma_II).
Vector ptd_combine(const ComponentEstimates& components, const TuningMatrix& omega);

struct CovarianceComponents;  // inference.hpp

// Omega_opt = H_theta^-1 (S12 - S13) (S22 - S33 + ridge I)^-1 H_gamma.
// ridge < 0 selects the default 1e-8 * trace(S22 - S33)/d, floored at 1e-12.
TuningMatrix optimal_tuning(const CovarianceComponents& cov, double ridge = -1.0);

}  // namespace mpd
