#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "mpd/simulation.hpp"

using namespace mpd;
using namespace testhelp;

namespace {

LossSpec linear_yx_spec() {
    // y on (z_cov, z_trt) with intercept, columns per the synthetic table
    LossSpec s;
    s.kind = LossKind::linear_regression;
    s.response_col = 2;
    s.covariate_cols = {0, 1};
    return s;
}

SimConfig small_config(int N, int K) {
    SimConfig config;
    config.design.N = N;
    config.design.K = K;
    config.design.b_targ = 0.005;
    config.design.master_seed = 99;
    double per = 200.0 / K;
    config.design.wave_budgets.assign(K, per);
    config.strategy.kind = StrategyConfig::Kind::greedy_knn;
    config.strategy.target_coordinate = 2;
    config.loss_spec = linear_yx_spec();
    config.replications = 4;
    config.alpha = 0.10;
    return config;
}

}  // namespace

TEST_CASE("synthetic table rejects tiny populations") {
    CHECK_THROWS_AS(synthetic_superpopulation(100, 1), ConfigError);
}

TEST_CASE("synthetic heteroskedasticity matches the analytic variances") {
    const int n = 200000;
    Superpopulation pop = synthetic_superpopulation(n, 5);

    // control arm near |z_cov| = 1: residual variance 1 + z^2 ~ 2
    std::vector<double> band;
    std::vector<double> treated_center;
    for (int i = 0; i < n; ++i) {
        double zc = pop.truth(i, 0), zt = pop.truth(i, 1), y = pop.truth(i, 2);
        double eps = y - 2.0 * zc;
        if (zt == 0.0 && std::abs(std::abs(zc) - 1.0) < 0.05) band.push_back(eps);
        if (zt == 1.0 && std::abs(zc) < 0.05) treated_center.push_back(eps);
    }
    auto check_var = [](const std::vector<double>& v, double target) {
        double m = mean_of(v);
        std::vector<double> sq(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m) * (v[i] - m);
        double var = mean_of(sq);
        double se = sd_of(sq) / std::sqrt(static_cast<double>(v.size()));
        CHECK(std::abs(var - target) <= 3.0 * se);
    };
    check_var(band, 2.0);
    check_var(treated_center, 101.0);
}

TEST_CASE("proxy logit score is centered by construction") {
    const int n = 50000;
    Superpopulation pop = synthetic_superpopulation(n, 9);
    double y_mean = 0.0;
    for (int i = 0; i < n; ++i) y_mean += pop.truth(i, 2) / n;
    double y_var = 0.0;
    for (int i = 0; i < n; ++i) {
        y_var += (pop.truth(i, 2) - y_mean) * (pop.truth(i, 2) - y_mean) / n;
    }
    double y_sd = std::sqrt(y_var);
    std::vector<double> score(n);
    for (int i = 0; i < n; ++i) {
        score[i] = 4.0 * pop.truth(i, 1) + pop.truth(i, 0) + pop.truth(i, 2) / y_sd;
    }
    double mu = mean_of(score);
    for (double& s : score) s -= mu;
    CHECK(std::abs(mean_of(score)) < 1e-10);
}

TEST_CASE("outcome form variants differ in the mean structure") {
    Superpopulation lit = synthetic_superpopulation(20000, 3, OutcomeForm::literal);
    Superpopulation trt = synthetic_superpopulation(20000, 3, OutcomeForm::trt);
    // identical draws, different conditional means
    CHECK(lit.truth(0, 0) == trt.truth(0, 0));
    bool differ = false;
    for (int i = 0; i < 20000 && !differ; ++i) {
        differ = lit.truth(i, 2) != trt.truth(i, 2);
    }
    CHECK(differ);
}

TEST_CASE("csv superpopulation round trips exactly") {
    std::string path = "/tmp/mpd_test_pop.csv";
    {
        std::ofstream f(path);
        f << "a,b,b_proxy\n";
        f << "0.30000000000000004,1,0\n";
        f << "-2.5,0,1\n";
        f << "1e-300,1,1\n";
    }
    SuperpopSchema schema;
    schema.feature_cols = {"a", "b"};
    schema.proxy_cols = {{"b", "b_proxy"}};
    Superpopulation pop = load_superpopulation(path, schema);
    CHECK(pop.truth(0, 0) == 0.30000000000000004);
    CHECK(pop.truth(2, 0) == 1e-300);
    CHECK(pop.truth(0, 1) == 1.0);
    CHECK(pop.proxy(0, 1) == 0.0);
    CHECK(pop.layout.expensive_cols == std::vector<int>{1});

    SuperpopSchema bad = schema;
    bad.feature_cols = {"a", "missing_col"};
    try {
        load_superpopulation(path, bad);
        CHECK(false);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("missing_col") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("csv loader reports bad cells with row numbers") {
    std::string path = "/tmp/mpd_test_bad.csv";
    {
        std::ofstream f(path);
        f << "a\n1.0\noops\n";
    }
    SuperpopSchema schema;
    schema.feature_cols = {"a"};
    try {
        load_superpopulation(path, schema);
        CHECK(false);
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("oracle estimand on constructed populations") {
    Superpopulation pop;
    pop.layout.p = 2;
    pop.columns = {"y", "x"};
    pop.truth.resize(50, 2);
    for (int i = 0; i < 50; ++i) {
        pop.truth(i, 1) = i * 0.1;
        pop.truth(i, 0) = 3.0 * pop.truth(i, 1);
    }
    pop.proxy = pop.truth;
    LossSpec lin;
    lin.kind = LossKind::linear_regression;
    lin.response_col = 0;
    lin.covariate_cols = {1};
    Vector theta = oracle_estimand(pop, LossModel(lin));
    CHECK(std::abs(theta[0]) < 1e-10);
    CHECK(theta[1] == doctest::Approx(3.0).epsilon(1e-10));

    LossSpec m;
    m.kind = LossKind::mean;
    double target = pop.truth.col(0).mean();
    CHECK(oracle_estimand(pop, LossModel(m))[0] == doctest::Approx(target).epsilon(1e-12));

    Superpopulation seq;
    seq.layout.p = 1;
    seq.columns = {"v"};
    seq.truth.resize(100, 1);
    for (int i = 0; i < 100; ++i) seq.truth(i, 0) = i + 1.0;
    seq.proxy = seq.truth;
    LossSpec q;
    q.kind = LossKind::quantile;
    q.tau = 0.75;
    CHECK(oracle_estimand(seq, LossModel(q))[0] == 75.0);
}

TEST_CASE("replications are deterministic and land near the label budget") {
    Superpopulation pop = synthetic_superpopulation(20000, 7);
    SimConfig config = small_config(2000, 2);
    LossModel loss(config.loss_spec);
    Vector oracle = oracle_estimand(pop, loss);

    ReplicationResult a = run_replication(pop, config, oracle, 3, false);
    ReplicationResult b = run_replication(pop, config, oracle, 3, false);
    CHECK(a.theta_mpd == b.theta_mpd);
    CHECK(a.ci_width_j == b.ci_width_j);
    CHECK(a.n_labelled == b.n_labelled);

    CHECK(std::abs(a.n_labelled - 200.0) <= 4.0 * std::sqrt(200.0));

    // the paired baseline reduces to a single uniform wave
    ReplicationResult base = run_replication(pop, config, oracle, 3, true);
    CHECK(base.n_labelled > 0);
    CHECK(std::abs(base.n_labelled - 200.0) <= 4.0 * std::sqrt(200.0));
}

TEST_CASE("aggregate metrics on degenerate inputs") {
    Vector oracle = Vector::Zero(1);
    ReplicationResult r;
    r.theta_mpd = Vector::Zero(1);
    r.ci.push_back({0, 0.9, -1.0, 1.0, false});
    r.covered = {1};
    r.n_labelled = 10;
    r.ci_width_j = 2.0;
    r.var_diag_used = Vector::Ones(1);
    std::vector<ReplicationResult> arm(5, r);
    StudyMetrics m = aggregate_metrics(arm, arm, oracle, 0, 100);
    CHECK(m.coverage == 1.0);
    CHECK(m.ess_ratio == doctest::Approx(1.0));
    CHECK(m.rmse == 0.0);

    std::vector<ReplicationResult> shorter(3, r);
    CHECK_THROWS_AS(aggregate_metrics(arm, shorter, oracle, 0, 100), DataError);
}

TEST_CASE("full study reruns identically at any parallelism degree") {
    Superpopulation pop = synthetic_superpopulation(20000, 7);
    SimConfig config = small_config(1000, 2);
    config.replications = 6;

    config.parallel = 1;
    StudyResult serial = run_study(pop, config);
    config.parallel = 4;
    StudyResult threaded = run_study(pop, config);

    CHECK(serial.oracle_theta == threaded.oracle_theta);
    for (int r = 0; r < 6; ++r) {
        CHECK(serial.adaptive[r].theta_mpd == threaded.adaptive[r].theta_mpd);
        CHECK(serial.baseline[r].theta_mpd == threaded.baseline[r].theta_mpd);
        CHECK(serial.adaptive[r].ci_width_j == threaded.adaptive[r].ci_width_j);
    }
    CHECK(serial.metrics.rmse == threaded.metrics.rmse);
    CHECK(serial.metrics.ess_ratio == threaded.metrics.ess_ratio);
}
