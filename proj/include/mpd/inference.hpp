#pragma once

#include "mpd/estimators.hpp"
#include "mpd/loss.hpp"
#include "mpd/types.hpp"

namespace mpd {

struct CovarianceComponents {
    Matrix S11, S12, S22, S13, S33;
    Matrix H_theta, H_gamma;
};

CovarianceComponents covariance_components(const LossModel& loss,
                                           const ObservedStudy& study,
                                           const ComponentEstimates& components);

struct MPDCovariance {
    Matrix sigma;
    Matrix omega_used;
    bool psd_warning = false;  // set when sigma is not PSD (small samples)
};

MPDCovariance mpd_covariance(const CovarianceComponents& cov, const Matrix& omega);

struct ConfidenceInterval {
    int coordinate = 0;
    double level = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool variance_clamped = false;  // negative diagonal clamped to 0
};

ConfidenceInterval confidence_interval(const Vector& theta_mpd,
                                       const MPDCovariance& sigma, int N,
                                       double alpha, int j);

// Inverse through SVD with a condition-number gate (cond > 1e12 throws).
Matrix stable_inverse(const Matrix& m, const char* what);

}  // namespace mpd
