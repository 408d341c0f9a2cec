#include "mpd/inference.hpp"

#include <cmath>

#include "mpd/stats.hpp"

namespace mpd {

Matrix stable_inverse(const Matrix& m, const char* what) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    double smax = sv(0);
    double smin = sv(sv.size() - 1);
    if (smin <= 0.0 || smax / smin > 1e12) {
        throw SingularMatrix(std::string("singular or ill-conditioned matrix: ") + what);
    }
    return svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

CovarianceComponents covariance_components(const LossModel& loss,
                                           const ObservedStudy& study,
                                           const ComponentEstimates& comp) {
    const int n = static_cast<int>(study.units.size());
    const int d = loss.dim();
    const Vector& w = study.weights.aggregated;

    int labelled = 0;
    for (const auto& u : study.units) labelled += u.labelled() ? 1 : 0;
    if (labelled == 0) throw InsufficientData("covariance_components: no labelled units");

    // Density contexts for the quantile loss: weighted labelled responses for
    // H_theta, unweighted proxy responses for H_gamma.
    WeightedSample ctx_theta, ctx_gamma;
    const WeightedSample* ctx_theta_ptr = nullptr;
    const WeightedSample* ctx_gamma_ptr = nullptr;
    if (loss.spec().kind == LossKind::quantile) {
        for (int i = 0; i < n; ++i) {
            ctx_gamma.values.push_back(loss.response(study.units[i].cheap));
            ctx_gamma.weights.push_back(1.0);
            if (study.units[i].labelled() && w[i] > 0.0) {
                ctx_theta.values.push_back(
                    loss.response(study.units[i].true_features(study.layout)));
                ctx_theta.weights.push_back(w[i]);
            }
        }
        ctx_theta_ptr = &ctx_theta;
        ctx_gamma_ptr = &ctx_gamma;
    }

    CovarianceComponents cov;
    cov.S11 = Matrix::Zero(d, d);
    cov.S12 = Matrix::Zero(d, d);
    cov.S22 = Matrix::Zero(d, d);
    cov.S13 = Matrix::Zero(d, d);
    cov.S33 = Matrix::Zero(d, d);
    cov.H_theta = Matrix::Zero(d, d);
    cov.H_gamma = Matrix::Zero(d, d);

    for (int i = 0; i < n; ++i) {
        const Vector& xt = study.units[i].cheap;
        Vector g_gamma = loss.gradient(comp.gamma_I, xt);
        cov.S33 += g_gamma * g_gamma.transpose();
        cov.H_gamma += loss.hessian(comp.gamma_I, xt, ctx_gamma_ptr);
        if (w[i] != 0.0) {
            Vector x = study.units[i].true_features(study.layout);
            Vector g_theta = loss.gradient(comp.theta_II, x);
            cov.S11 += w[i] * w[i] * g_theta * g_theta.transpose();
            cov.S12 += w[i] * w[i] * g_theta * g_gamma.transpose();
            cov.S22 += w[i] * w[i] * g_gamma * g_gamma.transpose();
            cov.S13 += w[i] * g_theta * g_gamma.transpose();
            cov.H_theta += w[i] * loss.hessian(comp.theta_II, x, ctx_theta_ptr);
        }
    }
    double dn = static_cast<double>(n);
    cov.S11 /= dn;
    cov.S12 /= dn;
    cov.S22 /= dn;
    cov.S13 /= dn;
    cov.S33 /= dn;
    cov.H_theta /= dn;
    cov.H_gamma /= dn;
    return cov;
}

MPDCovariance mpd_covariance(const CovarianceComponents& cov, const Matrix& omega) {
    Matrix ht_inv = stable_inverse(cov.H_theta, "H_theta");
    Matrix hg_inv = stable_inverse(cov.H_gamma, "H_gamma");
    Matrix cross = ht_inv * (cov.S13 - cov.S12) * hg_inv * omega.transpose();
    Matrix sigma = ht_inv * cov.S11 * ht_inv +
                   omega * hg_inv * (cov.S22 - cov.S33) * hg_inv * omega.transpose() +
                   cross + cross.transpose();
    // Symmetrize away round-off.
    sigma = 0.5 * (sigma + sigma.transpose());
    MPDCovariance out;
    out.sigma = sigma;
    out.omega_used = omega;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
    out.psd_warning = eig.eigenvalues().minCoeff() < -1e-10 * std::abs(eig.eigenvalues().maxCoeff());
    return out;
}

ConfidenceInterval confidence_interval(const Vector& theta_mpd,
                                       const MPDCovariance& sigma, int N,
                                       double alpha, int j) {
    if (j < 0 || j >= theta_mpd.size()) throw DataError("confidence_interval: bad coordinate");
    double var = sigma.sigma(j, j);
    ConfidenceInterval ci;
    ci.coordinate = j;
    ci.level = 1.0 - alpha;
    if (var < 0.0) {
        ci.variance_clamped = true;
        var = 0.0;
    }
    double half = var == 0.0
                      ? 0.0
                      : stats::normal_quantile(1.0 - alpha / 2.0) * std::sqrt(var / N);
    ci.lower = theta_mpd[j] - half;
    ci.upper = theta_mpd[j] + half;
    return ci;
}

}  // namespace mpd
