#include "mpd/loss.hpp"

#include <cmath>

#include "mpd/stats.hpp"

namespace mpd {

namespace {

double sigmoid(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    double e = std::exp(t);
    return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow
double log1pexp(double t) {
    if (t > 35.0) return t;
    return std::log1p(std::exp(t));
}

}  // namespace

LossModel::LossModel(LossSpec spec) : spec_(std::move(spec)) {
    if (spec_.kind == LossKind::quantile && !(spec_.tau > 0.0 && spec_.tau < 1.0)) {
        throw ConfigError("loss: quantile tau must lie in (0,1)");
    }
    if ((spec_.kind == LossKind::linear_regression ||
         spec_.kind == LossKind::logistic_regression) &&
        spec_.dim() < 1) {
        throw ConfigError("loss: regression needs at least one parameter");
    }
}

void LossModel::check_dims(const Vector& theta, const Vector& x) const {
    if (theta.size() != dim()) {
        throw DataError("loss: theta dimension mismatch");
    }
    if (spec_.response_col >= x.size()) {
        throw DataError("loss: feature vector too short for response column");
    }
    for (int c : spec_.covariate_cols) {
        if (c >= x.size()) throw DataError("loss: feature vector too short for covariate");
    }
}

Vector LossModel::design_row(const Vector& x) const {
    int d = dim();
    Vector z(d);
    int off = 0;
    if (spec_.intercept) {
        z[0] = 1.0;
        off = 1;
    }
    for (std::size_t c = 0; c < spec_.covariate_cols.size(); ++c) {
        z[off + static_cast<int>(c)] = x[spec_.covariate_cols[c]];
    }
    return z;
}

double LossModel::value(const Vector& theta, const Vector& x) const {
    check_dims(theta, x);
    switch (spec_.kind) {
        case LossKind::mean: {
            double r = response(x) - theta[0];
            return 0.5 * r * r;
        }
        case LossKind::quantile: {
            double r = response(x);
            double ind = (r <= theta[0]) ? 1.0 : 0.0;
            return (r - theta[0]) * (spec_.tau - ind);
        }
        case LossKind::linear_regression: {
            double r = response(x) - design_row(x).dot(theta);
            return 0.5 * r * r;
        }
        case LossKind::logistic_regression: {
            double eta = design_row(x).dot(theta);
            return log1pexp(eta) - response(x) * eta;
        }
    }
    return 0.0;
}

Vector LossModel::gradient(const Vector& theta, const Vector& x) const {
    check_dims(theta, x);
    switch (spec_.kind) {
        case LossKind::mean: {
            Vector g(1);
            g[0] = theta[0] - response(x);
            return g;
        }
        case LossKind::quantile: {
            Vector g(1);
            double ind = (response(x) <= theta[0]) ? 1.0 : 0.0;
            g[0] = ind - spec_.tau;
            return g;
        }
        case LossKind::linear_regression: {
            Vector z = design_row(x);
            return -z * (response(x) - z.dot(theta));
        }
        case LossKind::logistic_regression: {
            Vector z = design_row(x);
            return z * (sigmoid(z.dot(theta)) - response(x));
        }
    }
    return Vector();
}

Matrix LossModel::hessian(const Vector& theta, const Vector& x,
                          const WeightedSample* context) const {
    check_dims(theta, x);
    switch (spec_.kind) {
        case LossKind::mean:
            return Matrix::Ones(1, 1);
        case LossKind::quantile: {
            if (context == nullptr) {
                throw DataError("loss: quantile Hessian requires a weighted sample context");
            }
            Matrix h(1, 1);
            h(0, 0) = stats::weighted_kde(context->values, context->weights, theta[0]);
            return h;
        }
        case LossKind::linear_regression: {
            Vector z = design_row(x);
            return z * z.transpose();
        }
        case LossKind::logistic_regression: {
            Vector z = design_row(x);
            double s = sigmoid(z.dot(theta));
            return s * (1.0 - s) * z * z.transpose();
        }
    }
    return Matrix();
}

}  // namespace mpd
