#include "mpd/estimators.hpp"

#include <cmath>

#include "mpd/inference.hpp"
#include "mpd/stats.hpp"

namespace mpd {

namespace {

// Score of the weighted objective: n_norm^-1 sum_i w_i grad l_theta(x_i).
Vector weighted_score(const LossModel& loss, const Matrix& rows,
                      const Vector& weights, double n_norm, const Vector& theta) {
    Vector s = Vector::Zero(loss.dim());
    for (int i = 0; i < rows.rows(); ++i) {
        if (weights[i] == 0.0) continue;
        s += weights[i] * loss.gradient(theta, rows.row(i).transpose());
    }
    return s / n_norm;
}

Vector solve_least_squares(const LossModel& loss, const Matrix& rows,
                           const Vector& weights) {
    const int d = loss.dim();
    Matrix a = Matrix::Zero(d, d);
    Vector b = Vector::Zero(d);
    for (int i = 0; i < rows.rows(); ++i) {
        double w = weights[i];
        if (w == 0.0) continue;
        Vector x = rows.row(i).transpose();
        Vector z = loss.spec().kind == LossKind::mean ? Vector::Ones(1)
                                                      : loss.design_row(x);
        a += w * z * z.transpose();
        b += w * z * loss.response(x);
    }
    Eigen::FullPivLU<Matrix> lu(a);
    lu.setThreshold(1e-12);
    if (lu.rank() < d) {
        throw SingularMatrix("solve_weighted_m: rank-deficient normal equations");
    }
    return lu.solve(b);
}

Vector solve_logistic(const LossModel& loss, const Matrix& rows,
                      const Vector& weights, double n_norm,
                      std::optional<Vector> init, const SolveOptions& opts,
                      FitDiagnostics* diag) {
    const int d = loss.dim();
    Vector theta = init.value_or(Vector::Zero(d));
    auto objective = [&](const Vector& t) {
        double v = 0.0;
        for (int i = 0; i < rows.rows(); ++i) {
            if (weights[i] == 0.0) continue;
            v += weights[i] * loss.value(t, rows.row(i).transpose());
        }
        return v / n_norm;
    };
    double obj = objective(theta);
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        Vector score = weighted_score(loss, rows, weights, n_norm, theta);
        if (score.lpNorm<Eigen::Infinity>() <= opts.tol) break;
        Matrix hess = Matrix::Zero(d, d);
        for (int i = 0; i < rows.rows(); ++i) {
            if (weights[i] == 0.0) continue;
            hess += weights[i] * loss.hessian(theta, rows.row(i).transpose());
        }
        hess /= n_norm;
        Eigen::LDLT<Matrix> ldlt(hess);
        Vector step;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            step = ldlt.solve(score);
        } else {
            step = score;  // gradient fallback
        }
        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h < 40; ++h) {
            Vector cand = theta - scale * step;
            double cand_obj = objective(cand);
            if (cand_obj < obj + 1e-14) {
                theta = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break;
    }
    Vector score = weighted_score(loss, rows, weights, n_norm, theta);
    double gnorm = score.lpNorm<Eigen::Infinity>();
    if (diag != nullptr) {
        diag->iterations = it;
        diag->grad_norm = gnorm;
    }
    if (gnorm > opts.tol) {
        std::vector<double> last(theta.data(), theta.data() + theta.size());
        throw NonConvergence("solve_weighted_m: logistic fit did not converge "
                             "(possible separation), score max-norm " +
                                 std::to_string(gnorm),
                             std::move(last));
    }
    return theta;
}

Vector solve_quantile(const LossModel& loss, const Matrix& rows,
                      const Vector& weights) {
    std::vector<double> values, w;
    values.reserve(rows.rows());
    w.reserve(rows.rows());
    for (int i = 0; i < rows.rows(); ++i) {
        if (weights[i] == 0.0) continue;
        values.push_back(loss.response(rows.row(i).transpose()));
        w.push_back(weights[i]);
    }
    if (values.empty()) throw InsufficientData("solve_weighted_m: no weighted units");
    Vector theta(1);
    theta[0] = stats::weighted_quantile(values, w, loss.spec().tau);
    return theta;
}

}  // namespace

Vector solve_weighted_m(const LossModel& loss, const Matrix& rows,
                        const Vector& weights, double n_norm,
                        std::optional<Vector> init, const SolveOptions& opts,
                        FitDiagnostics* diag) {
    if (rows.rows() != weights.size()) {
        throw DataError("solve_weighted_m: rows/weights mismatch");
    }
    bool any = false;
    for (int i = 0; i < weights.size(); ++i) {
        if (weights[i] < 0.0) throw DataError("solve_weighted_m: negative weight");
        if (weights[i] > 0.0) any = true;
    }
    if (!any) throw InsufficientData("solve_weighted_m: all weights are zero");

    Vector theta;
    switch (loss.spec().kind) {
        case LossKind::mean:
        case LossKind::linear_regression:
            theta = solve_least_squares(loss, rows, weights);
            break;
        case LossKind::logistic_regression:
            return solve_logistic(loss, rows, weights, n_norm, std::move(init), opts, diag);
        case LossKind::quantile:
            theta = solve_quantile(loss, rows, weights);
            break;
    }
    if (diag != nullptr) {
        diag->iterations = 1;
        diag->grad_norm =
            weighted_score(loss, rows, weights, n_norm, theta).lpNorm<Eigen::Infinity>();
    }
    return theta;
}

ComponentEstimates fit_components(const LossModel& loss, const ObservedStudy& study,
                                  const SolveOptions& opts) {
    if (study.waves_done != study.design.K) {
        throw ProtocolError("fit_components: study has incomplete waves");
    }
    const int n = static_cast<int>(study.units.size());
    const int p = study.layout.p;
    const Vector& w = study.weights.aggregated;

    int labelled = 0;
    for (const auto& u : study.units) labelled += u.labelled() ? 1 : 0;
    if (labelled < loss.dim() + 1) {
        throw InsufficientData("fit_components: fewer labelled units than d+1");
    }

    Matrix proxy_rows(n, p);
    for (int i = 0; i < n; ++i) proxy_rows.row(i) = study.units[i].cheap.transpose();

    Matrix true_rows(labelled, p);
    Vector true_w(labelled);
    int r = 0;
    for (int i = 0; i < n; ++i) {
        if (!study.units[i].labelled()) continue;
        true_rows.row(r) = study.units[i].true_features(study.layout).transpose();
        true_w[r] = w[i];
        ++r;
    }

    ComponentEstimates out;
    double n_norm = static_cast<double>(n);
    out.theta_II = solve_weighted_m(loss, true_rows, true_w, n_norm, std::nullopt,
                                    opts, &out.diag_theta_II);
    out.gamma_II = solve_weighted_m(loss, proxy_rows, w, n_norm, std::nullopt, opts,
                                    &out.diag_gamma_II);
    out.gamma_I = solve_weighted_m(loss, proxy_rows, Vector::Ones(n), n_norm,
                                   std::nullopt, opts, &out.diag_gamma_I);
    return out;
}

Vector ptd_combine(const ComponentEstimates& components, const TuningMatrix& omega) {
    if (omega.omega.rows() != components.theta_II.size() ||
        omega.omega.cols() != components.gamma_I.size()) {
        throw DataError("ptd_combine: dimension mismatch");
    }
    return omega.omega * components.gamma_I +
           (components.theta_II - omega.omega * components.gamma_II);
}

TuningMatrix optimal_tuning(const CovarianceComponents& cov, double ridge) {
    const int d = static_cast<int>(cov.S22.rows());
    Matrix diff = cov.S22 - cov.S33;
    if (ridge < 0.0) {
        ridge = std::max(1e-8 * diff.trace() / d, 1e-12);
    }
    Matrix h_theta_inv = stable_inverse(cov.H_theta, "H_theta");
    stable_inverse(cov.H_gamma, "H_gamma");  // validate conditioning
    Matrix diff_inv = stable_inverse(diff + ridge * Matrix::Identity(d, d), "S22 - S33");
    TuningMatrix out;
    out.mode = OmegaMode::optimal;
    out.omega = h_theta_inv * (cov.S12 - cov.S13) * diff_inv * cov.H_gamma;
    return out;
}

}  // namespace mpd
