#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "mpd/loss.hpp"
#include "mpd/rng.hpp"

using namespace mpd;

namespace {

LossSpec mean_spec() {
    LossSpec s;
    s.kind = LossKind::mean;
    s.response_col = 0;
    return s;
}

LossSpec quantile_spec(double tau) {
    LossSpec s;
    s.kind = LossKind::quantile;
    s.tau = tau;
    s.response_col = 0;
    return s;
}

// response col 0, covariate col 1
LossSpec linear_spec(bool intercept) {
    LossSpec s;
    s.kind = LossKind::linear_regression;
    s.response_col = 0;
    s.covariate_cols = {1};
    s.intercept = intercept;
    return s;
}

LossSpec logistic_spec(bool intercept, std::vector<int> covs = {1}) {
    LossSpec s;
    s.kind = LossKind::logistic_regression;
    s.response_col = 0;
    s.covariate_cols = std::move(covs);
    s.intercept = intercept;
    return s;
}

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

Vector vec1(double a) {
    Vector v(1);
    v << a;
    return v;
}

double u01(int i) { return rng::uniform_open(4242, 0, 0, static_cast<std::uint64_t>(i)); }

}  // namespace

TEST_CASE("loss values on hand-evaluated points") {
    LossModel q(quantile_spec(0.5));
    CHECK(q.value(vec1(0.0), vec1(2.0)) == doctest::Approx(1.0).epsilon(1e-12));

    LossModel lin(linear_spec(false));
    CHECK(lin.value(vec1(2.0), vec2(2.0, 1.0)) == 0.0);

    LossModel logit(logistic_spec(false));
    CHECK(logit.value(vec1(0.0), vec2(1.0, 3.0)) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(logit.value(vec1(0.0), vec2(0.0, -1.0)) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    LossModel m(mean_spec());
    CHECK(m.value(vec1(1.0), vec1(3.0)) == 2.0);
}

TEST_CASE("gradients on hand-evaluated points") {
    LossModel lin(linear_spec(false));
    CHECK(lin.gradient(vec1(0.0), vec2(3.0, 1.0))[0] == -3.0);

    LossModel q(quantile_spec(0.75));
    CHECK(q.gradient(vec1(0.0), vec1(2.0))[0] == doctest::Approx(-0.75));

    LossModel logit(logistic_spec(false));
    CHECK(logit.gradient(vec1(0.0), vec2(1.0, 1.0))[0] == doctest::Approx(-0.5));
}

TEST_CASE("quantile kink gradient follows the right-hand convention") {
    // at x = theta the indicator counts the point, giving 1 - tau; this is
    // the right-hand derivative of the pinball loss
    LossModel q(quantile_spec(0.25));
    CHECK(q.gradient(vec1(2.0), vec1(2.0))[0] == doctest::Approx(0.75));
    double h = 1e-7;
    double right = (q.value(vec1(2.0 + h), vec1(2.0)) - q.value(vec1(2.0), vec1(2.0))) / h;
    CHECK(right == doctest::Approx(0.75).epsilon(1e-5));
}

TEST_CASE("hessians on hand-evaluated points") {
    LossSpec ls = linear_spec(true);
    LossModel lin(ls);
    Matrix h = lin.hessian(vec2(0.0, 0.0), vec2(5.0, 2.0));
    CHECK(h(0, 0) == 1.0);
    CHECK(h(0, 1) == 2.0);
    CHECK(h(1, 0) == 2.0);
    CHECK(h(1, 1) == 4.0);

    LossSpec logs = logistic_spec(true, {});
    LossModel logit(logs);
    Matrix hl = logit.hessian(vec1(0.0), vec1(1.0));
    CHECK(hl(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("quantile hessian equals a direct KDE evaluation") {
    LossModel q(quantile_spec(0.5));
    WeightedSample ctx;
    ctx.values = {1.0, 2.0, 3.0};
    ctx.weights = {1.0, 1.0, 1.0};
    Matrix h = q.hessian(vec1(2.0), vec1(0.0), &ctx);

    // independent brute-force KDE with the same bandwidth recipe
    double n_eff = 3.0;
    double sd = std::sqrt(2.0 / 3.0);
    // weighted quartiles of {1,2,3}: q25 = 1, q75 = 3
    double iqr = 2.0;
    double bw = 0.9 * std::min(sd, iqr / 1.34) * std::pow(n_eff, -0.2);
    double kde = 0.0;
    for (double v : ctx.values) {
        double t = (2.0 - v) / bw;
        kde += std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
    }
    kde /= 3.0 * bw;
    CHECK(h(0, 0) > 0.0);
    CHECK(h(0, 0) == doctest::Approx(kde).epsilon(1e-12));
}

TEST_CASE("quantile hessian requires the weighted sample context") {
    LossModel q(quantile_spec(0.5));
    CHECK_THROWS_AS(q.hessian(vec1(0.0), vec1(1.0)), DataError);
}

TEST_CASE("gradients match finite differences away from kinks") {
    auto check_loss = [](const LossModel& loss, auto make_point) {
        for (int i = 0; i < 100; ++i) {
            auto [theta, x] = make_point(i);
            Vector g = loss.gradient(theta, x);
            for (int c = 0; c < theta.size(); ++c) {
                double h = 1e-6 * std::max(1.0, std::abs(theta[c]));
                Vector tp = theta, tm = theta;
                tp[c] += h;
                tm[c] -= h;
                double fd = (loss.value(tp, x) - loss.value(tm, x)) / (2.0 * h);
                double scale = std::max(1.0, std::abs(g[c]));
                CHECK(std::abs(fd - g[c]) / scale < 1e-5);
            }
        }
    };

    LossModel m(mean_spec());
    check_loss(m, [](int i) {
        return std::pair<Vector, Vector>(vec1(2.0 * u01(i) - 1.0), vec1(4.0 * u01(i + 500) - 2.0));
    });
    LossModel lin(linear_spec(true));
    check_loss(lin, [](int i) {
        return std::pair<Vector, Vector>(vec2(u01(i), u01(i + 100)),
                                         vec2(3.0 * u01(i + 200), 2.0 * u01(i + 300) - 1.0));
    });
    LossModel logit(logistic_spec(true));
    check_loss(logit, [](int i) {
        return std::pair<Vector, Vector>(vec2(u01(i) - 0.5, u01(i + 100)),
                                         vec2(u01(i + 200) < 0.5 ? 0.0 : 1.0,
                                              2.0 * u01(i + 300) - 1.0));
    });
    LossModel q(quantile_spec(0.3));
    check_loss(q, [](int i) {
        double theta = u01(i);
        double x = theta + (u01(i + 100) < 0.5 ? -1.0 : 1.0) * (0.1 + u01(i + 200));
        return std::pair<Vector, Vector>(vec1(theta), vec1(x));
    });
}

TEST_CASE("hessians of smooth losses match finite differences") {
    LossModel lin(linear_spec(true));
    LossModel logit(logistic_spec(true));
    for (int i = 0; i < 50; ++i) {
        Vector theta = vec2(u01(i) - 0.5, u01(i + 50) - 0.5);
        Vector x = vec2(u01(i + 100) < 0.5 ? 0.0 : 1.0, 2.0 * u01(i + 150) - 1.0);
        for (const LossModel* loss : {&lin, &logit}) {
            Matrix h = loss->hessian(theta, x);
            for (int r = 0; r < 2; ++r) {
                double step = 1e-5;
                Vector tp = theta, tm = theta;
                tp[r] += step;
                tm[r] -= step;
                Vector fd = (loss->gradient(tp, x) - loss->gradient(tm, x)) / (2.0 * step);
                for (int c = 0; c < 2; ++c) {
                    double scale = std::max(1.0, std::abs(h(r, c)));
                    CHECK(std::abs(fd[c] - h(r, c)) / scale < 1e-4);
                }
            }
        }
    }
}

TEST_CASE("losses are convex along random segments") {
    LossModel m(mean_spec());
    LossModel lin(linear_spec(true));
    LossModel logit(logistic_spec(true));
    LossModel q(quantile_spec(0.6));
    for (int i = 0; i < 100; ++i) {
        Vector x2 = vec2(u01(i) < 0.5 ? 0.0 : 1.0, 2.0 * u01(i + 100) - 1.0);
        Vector a2 = vec2(2.0 * u01(i + 200) - 1.0, 2.0 * u01(i + 300) - 1.0);
        Vector b2 = vec2(2.0 * u01(i + 400) - 1.0, 2.0 * u01(i + 500) - 1.0);
        Vector mid2 = 0.5 * (a2 + b2);
        for (const LossModel* loss : {&lin, &logit}) {
            double lhs = loss->value(mid2, x2);
            double rhs = 0.5 * loss->value(a2, x2) + 0.5 * loss->value(b2, x2);
            CHECK(lhs <= rhs + 1e-10);
        }
        Vector x1 = vec1(4.0 * u01(i + 600) - 2.0);
        Vector a1 = vec1(2.0 * u01(i + 700) - 1.0);
        Vector b1 = vec1(2.0 * u01(i + 800) - 1.0);
        Vector mid1 = 0.5 * (a1 + b1);
        for (const LossModel* loss : {&m, &q}) {
            double lhs = loss->value(mid1, x1);
            double rhs = 0.5 * loss->value(a1, x1) + 0.5 * loss->value(b1, x1);
            CHECK(lhs <= rhs + 1e-10);
        }
    }
}

TEST_CASE("dimension mismatches are rejected") {
    LossModel lin(linear_spec(true));
    CHECK_THROWS_AS(lin.value(vec1(0.0), vec2(1.0, 1.0)), DataError);
}
