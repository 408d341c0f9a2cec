#pragma once

#include <vector>

#include "mpd/types.hpp"

namespace mpd {

enum class LossKind { mean, quantile, linear_regression, logistic_regression };

// Designates which feature columns play which role in the loss.
struct LossSpec {
    LossKind kind = LossKind::mean;
    double tau = 0.5;                 // quantile level
    int response_col = 0;
    std::vector<int> covariate_cols;  // regression losses only
    bool intercept = true;

    int dim() const {
        switch (kind) {
            case LossKind::mean:
            case LossKind::quantile:
                return 1;
            default:
                return static_cast<int>(covariate_cols.size()) + (intercept ? 1 : 0);
        }
    }
};

// Weighted response sample; context for the quantile Hessian density plug-in.
struct WeightedSample {
    std::vector<double> values;
    std::vector<double> weights;
};

// M-estimation loss l_theta(x) with gradient and Hessian. Kinks follow the
// right-hand Dini convention (the indicator 1{x <= theta} is 1 at x = theta).
class LossModel {
public:
    explicit LossModel(LossSpec spec);

    int dim() const { return spec_.dim(); }
    const LossSpec& spec() const { return spec_; }

    double value(const Vector& theta, const Vector& x) const;
    Vector gradient(const Vector& theta, const Vector& x) const;
    // For quantile the per-unit Hessian is a shared weighted KDE value of the
    // response at theta, supplied through context.
    Matrix hessian(const Vector& theta, const Vector& x,
                   const WeightedSample* context = nullptr) const;

    double response(const Vector& x) const { return x[spec_.response_col]; }
    // Regression design row z (with intercept column when configured).
    Vector design_row(const Vector& x) const;

private:
    void check_dims(const Vector& theta, const Vector& x) const;
    LossSpec spec_;
};

}  // namespace mpd
