#include "mpd/simulation.hpp"

#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "mpd/rng.hpp"
#include "mpd/stats.hpp"

namespace mpd {

namespace {

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    double e = std::exp(t);
    return e / (1.0 + e);
}

}  // namespace

Superpopulation synthetic_superpopulation(int n, std::uint64_t seed,
                                          OutcomeForm form) {
    if (n < 10000) throw ConfigError("synthetic_superpopulation: n must be >= 10^4");
    // Draw slots: 0 z_cov, 1 z_trt, 2..5 eps_1..4, 6 U.
    Vector z_cov(n), z_trt(n), y(n);
    std::vector<double> score(n);
    for (int i = 0; i < n; ++i) {
        auto normal = [&](std::uint64_t slot) {
            return stats::normal_quantile(
                rng::uniform_open(seed, 0, rng::kDgpBase + slot, static_cast<std::uint64_t>(i)));
        };
        double zc = normal(0);
        double zt = rng::uniform(seed, 0, rng::kDgpBase + 1, static_cast<std::uint64_t>(i)) < 0.5
                        ? 0.0
                        : 1.0;
        double e1 = normal(2), e2 = normal(3), e3 = normal(4), e4 = normal(5);
        double eps_y = e1 + 10.0 * zt * e2 + std::abs(zc) * e3 + 3.0 * zt * std::abs(zc) * e4;
        double mean_part = form == OutcomeForm::literal ? 2.0 * zc : zc + zt;
        z_cov[i] = zc;
        z_trt[i] = zt;
        y[i] = mean_part + eps_y;
    }
    double y_mean = y.mean();
    double y_sd = std::sqrt((y.array() - y_mean).square().mean());
    double mu = 0.0;
    for (int i = 0; i < n; ++i) {
        score[i] = 4.0 * z_trt[i] + z_cov[i] + y[i] / y_sd;
        mu += score[i];
    }
    mu /= n;

    Superpopulation pop;
    pop.columns = {"z_cov", "z_trt", "y"};
    pop.layout.p = 3;
    pop.layout.expensive_cols = {1};
    pop.truth.resize(n, 3);
    pop.proxy.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        double u = rng::uniform(seed, 0, rng::kDgpBase + 6, static_cast<std::uint64_t>(i));
        double proxy_trt = u <= sigmoid(score[i] - mu) ? 1.0 : 0.0;
        pop.truth(i, 0) = z_cov[i];
        pop.truth(i, 1) = z_trt[i];
        pop.truth(i, 2) = y[i];
        pop.proxy(i, 0) = z_cov[i];
        pop.proxy(i, 1) = proxy_trt;
        pop.proxy(i, 2) = y[i];
    }
    return pop;
}

Superpopulation load_superpopulation(const std::string& path,
                                     const SuperpopSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("load_superpopulation: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("load_superpopulation: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    auto col_index = [&](const std::string& name) {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == name) return static_cast<int>(c);
        }
        throw DataError("load_superpopulation: missing column '" + name + "'");
    };

    const int p = static_cast<int>(schema.feature_cols.size());
    std::vector<int> truth_idx(p), proxy_idx(p);
    FeatureLayout layout;
    layout.p = p;
    for (int c = 0; c < p; ++c) {
        truth_idx[c] = col_index(schema.feature_cols[c]);
        auto it = schema.proxy_cols.find(schema.feature_cols[c]);
        if (it != schema.proxy_cols.end()) {
            proxy_idx[c] = col_index(it->second);
            layout.expensive_cols.push_back(c);
        } else {
            proxy_idx[c] = truth_idx[c];
        }
    }

    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (cell.empty()) {
                throw DataError("load_superpopulation: missing value at row " +
                                std::to_string(line_no));
            }
            std::size_t pos = 0;
            double v;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw DataError("load_superpopulation: non-numeric cell '" + cell +
                                "' at row " + std::to_string(line_no));
            }
            if (pos != cell.size()) {
                throw DataError("load_superpopulation: non-numeric cell '" + cell +
                                "' at row " + std::to_string(line_no));
            }
            cells.push_back(v);
        }
        if (cells.size() != header.size()) {
            throw DataError("load_superpopulation: row " + std::to_string(line_no) +
                            " has " + std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(header.size()));
        }
        rows.push_back(std::move(cells));
    }

    Superpopulation pop;
    pop.layout = layout;
    pop.columns = schema.feature_cols;
    pop.truth.resize(rows.size(), p);
    pop.proxy.resize(rows.size(), p);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int c = 0; c < p; ++c) {
            pop.truth(static_cast<int>(i), c) = rows[i][truth_idx[c]];
            pop.proxy(static_cast<int>(i), c) = rows[i][proxy_idx[c]];
        }
    }
    return pop;
}

Vector oracle_estimand(const Superpopulation& superpop, const LossModel& loss) {
    const int n = static_cast<int>(superpop.truth.rows());
    return solve_weighted_m(loss, superpop.truth, Vector::Ones(n),
                            static_cast<double>(n));
}

ReplicationResult run_replication(const Superpopulation& superpop,
                                  const SimConfig& config, const Vector& oracle_theta,
                                  std::uint64_t rep_index, bool baseline_arm) {
    LossModel loss(config.loss_spec);
    const int d = loss.dim();

    StudyDesign design = config.design;
    StrategyConfig strategy = config.strategy;
    if (baseline_arm) {
        double total = design.total_budget();
        design.K = 1;
        design.wave_budgets = {total};
        design.c = {1.0};
        strategy.kind = StrategyConfig::Kind::uniform;
    }
    design.validate();

    ObservedStudy study;
    study.design = design;
    study.layout = superpop.layout;
    study.rep_index = rep_index;
    study.stream_purpose_base = baseline_arm ? rng::kBaselineWave : rng::kWaveBase;
    study.traces.resize(design.N, design.K);

    // Phase I: resample with replacement; the stream is shared between arms
    // so both see the same Phase-I data.
    const int n_super = static_cast<int>(superpop.truth.rows());
    const auto& exp_cols = superpop.layout.expensive_cols;
    study.units.resize(design.N);
    for (int i = 0; i < design.N; ++i) {
        double u = rng::uniform(design.master_seed, rep_index, rng::kResample,
                                static_cast<std::uint64_t>(i));
        int row = std::min(static_cast<int>(u * n_super), n_super - 1);
        UnitRecord& unit = study.units[i];
        unit.id = i;
        unit.cheap = superpop.proxy.row(row).transpose();
        unit.expensive.resize(static_cast<int>(exp_cols.size()));
        for (std::size_t c = 0; c < exp_cols.size(); ++c) {
            unit.expensive[static_cast<int>(c)] = superpop.truth(row, exp_cols[c]);
        }
    }

    // Phase-I proxy quantities used by adaptive waves.
    Matrix proxy_rows(design.N, superpop.layout.p);
    for (int i = 0; i < design.N; ++i) proxy_rows.row(i) = study.units[i].cheap.transpose();
    Vector gamma_I = solve_weighted_m(loss, proxy_rows, Vector::Ones(design.N),
                                      static_cast<double>(design.N));
    WeightedSample gamma_ctx;
    const WeightedSample* gamma_ctx_ptr = nullptr;
    if (loss.spec().kind == LossKind::quantile) {
        for (int i = 0; i < design.N; ++i) {
            gamma_ctx.values.push_back(loss.response(study.units[i].cheap));
            gamma_ctx.weights.push_back(1.0);
        }
        gamma_ctx_ptr = &gamma_ctx;
    }
    Matrix h_gamma = Matrix::Zero(d, d);
    for (int i = 0; i < design.N; ++i) {
        h_gamma += loss.hessian(gamma_I, study.units[i].cheap, gamma_ctx_ptr);
    }
    h_gamma /= static_cast<double>(design.N);

    ReplicationResult result;
    std::vector<LabelRule> rules;
    for (int k = 1; k <= design.K; ++k) {
        bool fallback = false;
        LabelRule rule = build_wave_rule(loss, strategy, study, k, rules, gamma_I,
                                        h_gamma, &fallback);
        result.fallback = result.fallback || fallback;
        run_wave(study, k, rule);
        rules.push_back(std::move(rule));
    }
    finalize_weights(study);

    ComponentEstimates components = fit_components(loss, study);
    CovarianceComponents cov = covariance_components(loss, study, components);

    TuningMatrix omega;
    omega.mode = config.omega_mode;
    switch (config.omega_mode) {
        case OmegaMode::identity:
            omega.omega = Matrix::Identity(d, d);
            break;
        case OmegaMode::zero:
            omega.omega = Matrix::Zero(d, d);
            break;
        case OmegaMode::optimal:
            omega = optimal_tuning(cov);
            break;
        case OmegaMode::constant:
            omega.omega = config.omega_const;
            break;
    }

    result.theta_mpd = ptd_combine(components, omega);
    MPDCovariance sigma = mpd_covariance(cov, omega.omega);

    result.var_diag_used = sigma.sigma.diagonal();
    result.var_diag_identity =
        mpd_covariance(cov, Matrix::Identity(d, d)).sigma.diagonal();
    result.var_diag_zero = mpd_covariance(cov, Matrix::Zero(d, d)).sigma.diagonal();

    result.ci.reserve(d);
    result.covered.reserve(d);
    for (int j = 0; j < d; ++j) {
        ConfidenceInterval ci =
            confidence_interval(result.theta_mpd, sigma, design.N, config.alpha, j);
        result.variance_clamped = result.variance_clamped || ci.variance_clamped;
        result.covered.push_back(
            (oracle_theta[j] >= ci.lower && oracle_theta[j] <= ci.upper) ? 1 : 0);
        result.ci.push_back(ci);
    }
    int j = config.strategy.target_coordinate;
    result.ci_width_j = result.ci[j].upper - result.ci[j].lower;
    for (const auto& u : study.units) result.n_labelled += u.labelled() ? 1 : 0;
    return result;
}

StudyMetrics aggregate_metrics(const std::vector<ReplicationResult>& adaptive,
                               const std::vector<ReplicationResult>& baseline,
                               const Vector& oracle_theta, int j, int N) {
    if (adaptive.size() != baseline.size() || adaptive.empty()) {
        throw DataError("aggregate_metrics: arms must be paired and non-empty");
    }
    const int m = static_cast<int>(adaptive.size());
    StudyMetrics out;
    out.replications = m;

    std::vector<double> theta_j(m);
    double se2 = 0.0, base_se2 = 0.0;
    double cov_sum = 0.0, base_cov_sum = 0.0;
    double ess_sum = 0.0, ess_raw_sum = 0.0;
    double var_over_n_sum = 0.0;
    for (int r = 0; r < m; ++r) {
        double err = adaptive[r].theta_mpd[j] - oracle_theta[j];
        se2 += err * err;
        theta_j[r] = adaptive[r].theta_mpd[j];
        double base_err = baseline[r].theta_mpd[j] - oracle_theta[j];
        base_se2 += base_err * base_err;
        cov_sum += adaptive[r].covered[j];
        base_cov_sum += baseline[r].covered[j];
        double width_ratio = baseline[r].ci_width_j / adaptive[r].ci_width_j;
        ess_raw_sum += width_ratio * width_ratio;
        ess_sum += width_ratio * width_ratio *
                   (static_cast<double>(adaptive[r].n_labelled) /
                    static_cast<double>(baseline[r].n_labelled));
        var_over_n_sum += adaptive[r].var_diag_used[j] / N;
        out.fallback_count += adaptive[r].fallback ? 1 : 0;
    }
    out.rmse = std::sqrt(se2 / m);
    out.baseline_rmse = std::sqrt(base_se2 / m);
    out.coverage = cov_sum / m;
    out.baseline_coverage = base_cov_sum / m;
    out.ess_ratio = ess_sum / m;
    out.ess_ratio_unadjusted = ess_raw_sum / m;
    out.skewness = stats::skewness(theta_j);
    out.excess_kurtosis = stats::excess_kurtosis(theta_j);
    out.mean_var_over_n = var_over_n_sum / m;
    out.emp_var_theta = stats::variance(theta_j);
    return out;
}

StudyResult run_study(const Superpopulation& superpop, const SimConfig& config) {
    if (config.replications < 1) throw ConfigError("run_study: replications must be >= 1");
    LossModel loss(config.loss_spec);
    StudyResult result;
    result.oracle_theta = oracle_estimand(superpop, loss);
    result.adaptive.resize(config.replications);
    result.baseline.resize(config.replications);

    int threads = config.parallel > 0
                      ? config.parallel
                      : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, config.replications));

    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&](int t) {
        try {
            for (int r = t; r < config.replications; r += threads) {
                result.adaptive[r] = run_replication(superpop, config, result.oracle_theta,
                                                     static_cast<std::uint64_t>(r), false);
                result.baseline[r] = run_replication(superpop, config, result.oracle_theta,
                                                     static_cast<std::uint64_t>(r), true);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);

    result.metrics = aggregate_metrics(result.adaptive, result.baseline,
                                       result.oracle_theta,
                                       config.strategy.target_coordinate,
                                       config.design.N);
    return result;
}

}  // namespace mpd
