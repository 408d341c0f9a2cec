#include "mpd/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "mpd/csv.hpp"
#include "mpd/sampling.hpp"
#include "mpd/stats.hpp"

namespace mpd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

bool log_enabled() {
    const char* lvl = std::getenv("MPD_LOG");
    return lvl != nullptr && std::string(lvl) != "quiet" && std::string(lvl) != "";
}

void log_info(const std::string& msg) {
    if (log_enabled()) std::cerr << "[mpd] " << msg << "\n";
}

std::string fmt(double v) { return csv::format_double(v); }

}  // namespace

std::string replications_csv_text(const StudyResult& result, int target_coordinate) {
    std::ostringstream out;
    const int d = static_cast<int>(result.oracle_theta.size());
    const int j = target_coordinate;
    std::vector<std::string> header = {"rep",     "arm",      "n_labelled",
                                       "fallback", "var_clamped", "ci_lo",
                                       "ci_hi",   "width",    "covered",
                                       "err",     "sigma_jj"};
    for (int c = 0; c < d; ++c) header.push_back("theta_" + std::to_string(c));
    csv::write_row(out, header);

    auto emit = [&](const std::vector<ReplicationResult>& arm, const char* name) {
        for (std::size_t r = 0; r < arm.size(); ++r) {
            const ReplicationResult& rep = arm[r];
            std::vector<std::string> row = {
                std::to_string(r),
                name,
                std::to_string(rep.n_labelled),
                rep.fallback ? "1" : "0",
                rep.variance_clamped ? "1" : "0",
                fmt(rep.ci[j].lower),
                fmt(rep.ci[j].upper),
                fmt(rep.ci_width_j),
                std::to_string(rep.covered[j]),
                fmt(rep.theta_mpd[j] - result.oracle_theta[j]),
                fmt(rep.var_diag_used[j])};
            for (int c = 0; c < d; ++c) row.push_back(fmt(rep.theta_mpd[c]));
            csv::write_row(out, row);
        }
    };
    emit(result.adaptive, "adaptive");
    emit(result.baseline, "baseline");
    return out.str();
}

std::string summary_csv_text(const StudyResult& result, const SimConfig& config) {
    std::ostringstream out;
    const StudyMetrics& m = result.metrics;
    csv::write_row(out, {"replications", "oracle_theta_j", "rmse", "baseline_rmse",
                         "coverage", "baseline_coverage", "ess_ratio",
                         "ess_ratio_unadjusted", "skewness", "excess_kurtosis",
                         "mean_var_over_n", "emp_var_theta", "fallback_count"});
    csv::write_row(out, {std::to_string(m.replications),
                         fmt(result.oracle_theta[config.strategy.target_coordinate]),
                         fmt(m.rmse), fmt(m.baseline_rmse), fmt(m.coverage),
                         fmt(m.baseline_coverage), fmt(m.ess_ratio),
                         fmt(m.ess_ratio_unadjusted), fmt(m.skewness),
                         fmt(m.excess_kurtosis), fmt(m.mean_var_over_n),
                         fmt(m.emp_var_theta), std::to_string(m.fallback_count)});
    return out.str();
}

int cmd_simulate(const SimulateOptions& opts) {
    RunConfig cfg = parse_config(opts.config_path);
    if (opts.seed) cfg.sim.design.master_seed = *opts.seed;
    if (opts.reps) cfg.sim.replications = *opts.reps;
    if (opts.parallel) cfg.sim.parallel = *opts.parallel;
    if (cfg.sim.replications < 1) throw ConfigError("simulate: replications must be >= 1");

    // Fold overrides back into the canonical text so the manifest reruns
    // identically.
    json resolved = json::parse(cfg.canonical);
    resolved["seed"] = cfg.sim.design.master_seed;
    resolved["replications"] = cfg.sim.replications;
    resolved["parallel"] = cfg.sim.parallel;
    cfg.canonical = resolved.dump(2);

    fs::path out_dir(opts.out_dir);
    fs::create_directories(out_dir);
    fs::path manifest_path = out_dir / "manifest.json";
    if (fs::exists(manifest_path) && !opts.force) {
        std::cerr << "simulate: " << manifest_path.string()
                  << " already exists; pass --force to overwrite\n";
        return 2;
    }

    Superpopulation superpop = load_source(cfg.source);
    resolve_strata(cfg, superpop);
    log_info("superpopulation loaded: " + std::to_string(superpop.truth.rows()) + " rows");

    StudyResult result = run_study(superpop, cfg.sim);
    log_info("study complete: " + std::to_string(cfg.sim.replications) + " replications");

    {
        std::ofstream f(out_dir / "replications.csv");
        f << replications_csv_text(result, cfg.sim.strategy.target_coordinate);
    }
    {
        std::ofstream f(out_dir / "summary.csv");
        f << summary_csv_text(result, cfg.sim);
    }
    {
        json manifest = json::parse(cfg.canonical);
        manifest["config_hash"] = config_hash(cfg.canonical);
        manifest["version"] = kVersion;
        std::ofstream f(manifest_path);
        f << manifest.dump(2) << "\n";
    }
    return 0;
}

int cmd_gen_data(const GenDataOptions& opts) {
    if (opts.kind != "synthetic") {
        throw ConfigError("gen-data: kind '" + opts.kind + "' is not supported");
    }
    OutcomeForm form;
    if (opts.outcome_form == "literal") {
        form = OutcomeForm::literal;
    } else if (opts.outcome_form == "trt") {
        form = OutcomeForm::trt;
    } else {
        throw ConfigError("gen-data: outcome form must be 'literal' or 'trt'");
    }
    Superpopulation pop = synthetic_superpopulation(opts.n, opts.seed, form);
    std::ofstream f(opts.out_path);
    if (!f) throw DataError("gen-data: cannot write " + opts.out_path);
    csv::write_row(f, {"z_cov", "z_trt", "z_trt_proxy", "y"});
    for (int i = 0; i < pop.truth.rows(); ++i) {
        csv::write_row(f, {fmt(pop.truth(i, 0)), fmt(pop.truth(i, 1)),
                           fmt(pop.proxy(i, 1)), fmt(pop.truth(i, 2))});
    }
    return 0;
}

int cmd_estimate(const EstimateOptions& opts) {
    if (opts.weights_path.empty() == opts.trace_path.empty()) {
        throw ConfigError("estimate: provide exactly one of --weights or --trace");
    }
    std::ifstream in(opts.loss_config_path);
    if (!in) throw ConfigError("estimate: cannot open " + opts.loss_config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("estimate: invalid JSON: ") + e.what());
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::string k = it.key();
        if (k != "loss" && k != "features" && k != "proxies" && k != "c") {
            throw ConfigError("estimate: unknown key '" + k + "'");
        }
    }

    std::vector<std::string> features;
    for (const auto& f : j.at("features")) features.push_back(f.get<std::string>());
    std::map<std::string, std::string> proxies;
    if (j.contains("proxies")) {
        for (auto it = j.at("proxies").begin(); it != j.at("proxies").end(); ++it) {
            proxies[it.key()] = it.value().get<std::string>();
        }
    }

    // Reuse the config-module loss parser via a minimal config round trip.
    json probe = {{"loss", j.at("loss")},
                  {"design", {{"N", 10000}, {"waves", {100.0}}}},
                  {"strategy", {{"kind", "uniform"}}},
                  {"replications", 1},
                  {"superpopulation",
                   {{"source", "csv"}, {"path", opts.data_path}, {"features", features}}}};
    if (!proxies.empty()) {
        json jp;
        for (const auto& [k, v] : proxies) jp[k] = v;
        probe["superpopulation"]["proxies"] = jp;
    }
    RunConfig parsed = parse_config_text(probe.dump());
    LossModel loss(parsed.sim.loss_spec);
    const int d = loss.dim();

    csv::Table data = csv::read(opts.data_path);
    const int n = static_cast<int>(data.rows.size());
    const int p = static_cast<int>(features.size());

    FeatureLayout layout;
    layout.p = p;
    std::vector<int> truth_cols(p), proxy_cols(p);
    for (int c = 0; c < p; ++c) {
        truth_cols[c] = data.column(features[c]);
        auto it = proxies.find(features[c]);
        if (it != proxies.end()) {
            proxy_cols[c] = data.column(it->second);
            layout.expensive_cols.push_back(c);
        } else {
            proxy_cols[c] = truth_cols[c];
        }
    }

    ObservedStudy study;
    study.layout = layout;
    study.units.resize(n);

    Vector weights;
    int K = 1;
    std::vector<int> labelled_wave(n, 0);
    if (!opts.trace_path.empty()) {
        csv::Table trace = csv::read(opts.trace_path);
        if (static_cast<int>(trace.rows.size()) != n) {
            throw DataError("estimate: trace row count does not match data");
        }
        while (true) {
            std::string name = "pi_" + std::to_string(K + 1);
            bool found = false;
            for (const auto& h : trace.header) found = found || h == name;
            if (!found) break;
            ++K;
        }
        study.traces.resize(n, K);
        for (int k = 0; k < K; ++k) {
            int cpi = trace.column("pi_" + std::to_string(k + 1));
            int cu = trace.column("u_" + std::to_string(k + 1));
            int ci = trace.column("I_" + std::to_string(k + 1));
            for (int i = 0; i < n; ++i) {
                study.traces.pi(i, k) = std::stod(trace.rows[i][cpi]);
                study.traces.u(i, k) = std::stod(trace.rows[i][cu]);
                int ind = std::stoi(trace.rows[i][ci]);
                study.traces.indicator(i, k) = ind;
                if (ind == 1 && labelled_wave[i] == 0) labelled_wave[i] = k + 1;
            }
        }
        Matrix wave_w = compute_wave_weights(study.traces, K);
        Vector c(K);
        if (j.contains("c")) {
            if (static_cast<int>(j.at("c").size()) != K) {
                throw ConfigError("estimate: c must have one entry per trace wave");
            }
            for (int k = 0; k < K; ++k) c[k] = j.at("c")[k].get<double>();
        } else {
            // default mix proportional to realized labels per wave
            Vector counts = Vector::Zero(K);
            for (int i = 0; i < n; ++i) {
                if (labelled_wave[i] > 0) counts[labelled_wave[i] - 1] += 1.0;
            }
            double total = counts.sum();
            if (total == 0.0) throw InsufficientData("estimate: no labelled rows");
            c = counts / total;
        }
        weights = aggregate_weights(wave_w, c);
        study.weights.wave_weights = wave_w;
        study.weights.c = c;
    } else {
        csv::Table wt = csv::read(opts.weights_path);
        if (static_cast<int>(wt.rows.size()) != n) {
            throw DataError("estimate: weights row count does not match data");
        }
        int cw = wt.column("W");
        weights.resize(n);
        study.traces.resize(n, 1);
        for (int i = 0; i < n; ++i) {
            weights[i] = std::stod(wt.rows[i][cw]);
            if (weights[i] > 0.0) labelled_wave[i] = 1;
            // placeholder trace consistent with the label state
            study.traces.pi(i, 0) = 0.5;
            study.traces.u(i, 0) = weights[i] > 0.0 ? 0.25 : 0.75;
            study.traces.indicator(i, 0) = weights[i] > 0.0 ? 1 : 0;
        }
        study.weights.wave_weights = weights;
        study.weights.c = Vector::Ones(1);
    }
    study.weights.aggregated = weights;

    for (int i = 0; i < n; ++i) {
        UnitRecord& unit = study.units[i];
        unit.id = i;
        unit.cheap.resize(p);
        for (int c = 0; c < p; ++c) {
            const std::string& cell = data.rows[i][proxy_cols[c]];
            if (cell.empty()) {
                throw DataError("estimate: missing proxy value at row " +
                                std::to_string(i + 2));
            }
            unit.cheap[c] = std::stod(cell);
        }
        unit.expensive.resize(static_cast<int>(layout.expensive_cols.size()));
        if (labelled_wave[i] > 0) {
            unit.labelled_wave = labelled_wave[i];
            for (std::size_t c = 0; c < layout.expensive_cols.size(); ++c) {
                const std::string& cell = data.rows[i][truth_cols[layout.expensive_cols[c]]];
                if (cell.empty()) {
                    throw DataError("estimate: labelled row " + std::to_string(i + 2) +
                                    " is missing expensive column '" +
                                    features[layout.expensive_cols[c]] + "'");
                }
                unit.expensive[static_cast<int>(c)] = std::stod(cell);
            }
        }
    }

    study.design.N = n;
    study.design.K = K;
    study.design.wave_budgets.assign(K, 1.0);
    study.design.b_targ = 1e-6;
    study.waves_done = K;

    ComponentEstimates components = fit_components(loss, study);
    CovarianceComponents cov = covariance_components(loss, study, components);
    TuningMatrix omega = optimal_tuning(cov);
    Vector theta = ptd_combine(components, omega);
    MPDCovariance sigma = mpd_covariance(cov, omega.omega);

    csv::write_row(std::cout,
                   {"coordinate", "theta_mpd", "sigma_jj", "ci_lower", "ci_upper"});
    for (int c = 0; c < d; ++c) {
        ConfidenceInterval ci = confidence_interval(theta, sigma, n, opts.alpha, c);
        csv::write_row(std::cout, {std::to_string(c), fmt(theta[c]),
                                   fmt(sigma.sigma(c, c)), fmt(ci.lower), fmt(ci.upper)});
    }
    return 0;
}

int cmd_report(const std::string& run_dir) {
    fs::path dir(run_dir);
    RunConfig cfg = parse_config((dir / "manifest.json").string());
    csv::Table table = csv::read((dir / "replications.csv").string());
    const int j = cfg.sim.strategy.target_coordinate;
    const int N = cfg.sim.design.N;

    int c_arm = table.column("arm");
    int c_err = table.column("err");
    int c_cov = table.column("covered");
    int c_width = table.column("width");
    int c_nlab = table.column("n_labelled");
    int c_var = table.column("sigma_jj");
    int c_fb = table.column("fallback");
    int c_theta = table.column("theta_" + std::to_string(j));

    struct Row {
        double err, width, var, theta;
        int covered, n_labelled, fallback;
    };
    std::vector<Row> adaptive, baseline;
    for (const auto& r : table.rows) {
        Row row{std::stod(r[c_err]), std::stod(r[c_width]), std::stod(r[c_var]),
                std::stod(r[c_theta]), std::stoi(r[c_cov]), std::stoi(r[c_nlab]),
                std::stoi(r[c_fb])};
        (r[c_arm] == "adaptive" ? adaptive : baseline).push_back(row);
    }
    if (adaptive.size() != baseline.size() || adaptive.empty()) {
        throw DataError("report: adaptive and baseline rows must pair up");
    }
    const int m = static_cast<int>(adaptive.size());
    double se2 = 0.0, base_se2 = 0.0, cov_sum = 0.0, base_cov = 0.0;
    double ess = 0.0, ess_raw = 0.0, var_sum = 0.0;
    int fallbacks = 0;
    std::vector<double> theta(m);
    for (int r = 0; r < m; ++r) {
        se2 += adaptive[r].err * adaptive[r].err;
        base_se2 += baseline[r].err * baseline[r].err;
        cov_sum += adaptive[r].covered;
        base_cov += baseline[r].covered;
        double wr = baseline[r].width / adaptive[r].width;
        ess_raw += wr * wr;
        ess += wr * wr * (static_cast<double>(adaptive[r].n_labelled) /
                          static_cast<double>(baseline[r].n_labelled));
        var_sum += adaptive[r].var / N;
        theta[r] = adaptive[r].theta;
        fallbacks += adaptive[r].fallback;
    }
    csv::write_row(std::cout, {"replications", "rmse", "baseline_rmse", "coverage",
                               "baseline_coverage", "ess_ratio", "ess_ratio_unadjusted",
                               "skewness", "excess_kurtosis", "mean_var_over_n",
                               "emp_var_theta", "fallback_count"});
    csv::write_row(std::cout,
                   {std::to_string(m), fmt(std::sqrt(se2 / m)), fmt(std::sqrt(base_se2 / m)),
                    fmt(cov_sum / m), fmt(base_cov / m), fmt(ess / m), fmt(ess_raw / m),
                    fmt(stats::skewness(theta)), fmt(stats::excess_kurtosis(theta)),
                    fmt(var_sum / m), fmt(stats::variance(theta)), std::to_string(fallbacks)});
    return 0;
}

}  // namespace mpd
