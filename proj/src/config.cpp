#include "mpd/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace mpd {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (allowed.count(it.key()) == 0) {
            throw ConfigError("config: unknown key '" + path + it.key() + "'");
        }
    }
}

int feature_index(const std::vector<std::string>& features, const std::string& name,
                  const std::string& path) {
    auto it = std::find(features.begin(), features.end(), name);
    if (it == features.end()) {
        throw ConfigError("config: '" + path + "' names unknown feature column '" +
                          name + "'");
    }
    return static_cast<int>(it - features.begin());
}

LossSpec parse_loss(const json& j, const std::vector<std::string>& features) {
    check_keys(j, "loss.", {"kind", "tau", "response", "covariates", "intercept"});
    LossSpec spec;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "mean") {
        spec.kind = LossKind::mean;
    } else if (kind == "quantile") {
        spec.kind = LossKind::quantile;
    } else if (kind == "linear") {
        spec.kind = LossKind::linear_regression;
    } else if (kind == "logistic") {
        spec.kind = LossKind::logistic_regression;
    } else {
        throw ConfigError("config: loss.kind '" + kind + "' is not supported");
    }
    if (j.contains("tau")) spec.tau = j.at("tau").get<double>();
    spec.response_col = feature_index(features, j.at("response").get<std::string>(),
                                      "loss.response");
    if (j.contains("covariates")) {
        for (const auto& c : j.at("covariates")) {
            spec.covariate_cols.push_back(
                feature_index(features, c.get<std::string>(), "loss.covariates"));
        }
    }
    if (j.contains("intercept")) spec.intercept = j.at("intercept").get<bool>();
    if ((spec.kind == LossKind::linear_regression ||
         spec.kind == LossKind::logistic_regression) &&
        spec.covariate_cols.empty() && !spec.intercept) {
        throw ConfigError("config: regression loss needs covariates or an intercept");
    }
    return spec;
}

SuperpopSource parse_source(const json& j) {
    SuperpopSource src;
    std::string source = j.at("source").get<std::string>();
    if (source == "synthetic") {
        check_keys(j, "superpopulation.", {"source", "n", "seed", "outcome_form"});
        src.kind = SuperpopSource::Kind::synthetic;
        src.n = j.at("n").get<int>();
        src.seed = j.value("seed", 0ull);
        std::string form = j.value("outcome_form", std::string("literal"));
        if (form == "literal") {
            src.form = OutcomeForm::literal;
        } else if (form == "trt") {
            src.form = OutcomeForm::trt;
        } else {
            throw ConfigError("config: superpopulation.outcome_form must be "
                              "'literal' or 'trt'");
        }
        src.schema.feature_cols = {"z_cov", "z_trt", "y"};
        src.schema.proxy_cols = {{"z_trt", "z_trt_proxy"}};
    } else if (source == "csv") {
        check_keys(j, "superpopulation.", {"source", "path", "features", "proxies"});
        src.kind = SuperpopSource::Kind::csv;
        src.path = j.at("path").get<std::string>();
        std::ifstream probe(src.path);
        if (!probe) {
            throw ConfigError("config: superpopulation.path '" + src.path +
                              "' does not exist");
        }
        for (const auto& f : j.at("features")) {
            src.schema.feature_cols.push_back(f.get<std::string>());
        }
        if (j.contains("proxies")) {
            for (auto it = j.at("proxies").begin(); it != j.at("proxies").end(); ++it) {
                feature_index(src.schema.feature_cols, it.key(),
                              "superpopulation.proxies");
                src.schema.proxy_cols[it.key()] = it.value().get<std::string>();
            }
        }
    } else {
        throw ConfigError("config: superpopulation.source must be 'synthetic' or 'csv'");
    }
    return src;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    check_keys(j, "", {"design", "strategy", "loss", "superpopulation", "replications",
                       "alpha", "omega", "seed", "parallel", "config_hash", "version"});

    RunConfig cfg;
    cfg.source = parse_source(j.at("superpopulation"));
    const auto& features = cfg.source.schema.feature_cols;
    cfg.sim.loss_spec = parse_loss(j.at("loss"), features);
    const int d = cfg.sim.loss_spec.dim();

    const json& jd = j.at("design");
    check_keys(jd, "design.", {"N", "waves", "b_targ", "c"});
    StudyDesign& design = cfg.sim.design;
    design.N = jd.at("N").get<int>();
    for (const auto& b : jd.at("waves")) design.wave_budgets.push_back(b.get<double>());
    design.K = static_cast<int>(design.wave_budgets.size());
    if (design.K == 0) throw ConfigError("config: design.waves must name at least one wave");
    if (jd.contains("b_targ")) {
        design.b_targ = jd.at("b_targ").get<double>();
    } else {
        double min_budget = *std::min_element(design.wave_budgets.begin(),
                                              design.wave_budgets.end());
        design.b_targ = min_budget / (100.0 * design.N);
    }
    if (jd.contains("c")) {
        for (const auto& c : jd.at("c")) design.c.push_back(c.get<double>());
    }
    design.master_seed = j.value("seed", 0ull);
    design.validate();

    const json& js = j.at("strategy");
    check_keys(js, "strategy.", {"kind", "k_neighbors", "target_coordinate", "strata"});
    StrategyConfig& strat = cfg.sim.strategy;
    std::string kind = js.at("kind").get<std::string>();
    if (kind == "uniform") {
        strat.kind = StrategyConfig::Kind::uniform;
    } else if (kind == "greedy_knn") {
        strat.kind = StrategyConfig::Kind::greedy_knn;
    } else if (kind == "greedy_stratified") {
        strat.kind = StrategyConfig::Kind::greedy_stratified;
    } else {
        throw ConfigError("config: strategy.kind '" + kind + "' is not supported");
    }
    if (js.contains("k_neighbors")) strat.k_neighbors = js.at("k_neighbors").get<int>();
    if (strat.k_neighbors < 1) throw ConfigError("config: strategy.k_neighbors must be >= 1");
    strat.target_coordinate = js.value("target_coordinate", 0);
    if (strat.target_coordinate < 0 || strat.target_coordinate >= d) {
        throw ConfigError("config: strategy.target_coordinate outside parameter dimension");
    }
    if (js.contains("strata")) {
        const json& jt = js.at("strata");
        check_keys(jt, "strategy.strata.", {"cols", "breakpoints", "assignment_col"});
        if (jt.contains("assignment_col")) {
            cfg.strata_assignment_col = jt.at("assignment_col").get<std::string>();
            feature_index(features, *cfg.strata_assignment_col,
                          "strategy.strata.assignment_col");
        } else {
            for (const auto& c : jt.at("cols")) {
                strat.strata.cols.push_back(
                    feature_index(features, c.get<std::string>(), "strategy.strata.cols"));
            }
            for (const auto& bps : jt.at("breakpoints")) {
                std::vector<double> v;
                for (const auto& b : bps) v.push_back(b.get<double>());
                strat.strata.breakpoints.push_back(std::move(v));
            }
            if (strat.strata.cols.size() != strat.strata.breakpoints.size()) {
                throw ConfigError("config: strategy.strata cols/breakpoints mismatch");
            }
        }
    } else if (strat.kind == StrategyConfig::Kind::greedy_stratified) {
        throw ConfigError("config: greedy_stratified requires strategy.strata");
    }

    cfg.sim.replications = j.value("replications", 0);
    if (cfg.sim.replications < 1) {
        throw ConfigError("config: replications must be >= 1");
    }
    cfg.sim.alpha = j.value("alpha", 0.10);
    if (!(cfg.sim.alpha > 0.0 && cfg.sim.alpha < 1.0)) {
        throw ConfigError("config: alpha must lie in (0,1)");
    }
    cfg.sim.parallel = j.value("parallel", 0);

    if (j.contains("omega")) {
        const json& jo = j.at("omega");
        if (jo.is_string()) {
            std::string mode = jo.get<std::string>();
            if (mode == "optimal") {
                cfg.sim.omega_mode = OmegaMode::optimal;
            } else if (mode == "identity") {
                cfg.sim.omega_mode = OmegaMode::identity;
            } else if (mode == "zero") {
                cfg.sim.omega_mode = OmegaMode::zero;
            } else {
                throw ConfigError("config: omega mode '" + mode + "' is not supported");
            }
        } else {
            check_keys(jo, "omega.", {"constant"});
            cfg.sim.omega_mode = OmegaMode::constant;
            const json& rows = jo.at("constant");
            cfg.sim.omega_const.resize(rows.size(), rows.size());
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (rows[r].size() != rows.size()) {
                    throw ConfigError("config: omega.constant must be a d x d matrix");
                }
                for (std::size_t c = 0; c < rows[r].size(); ++c) {
                    cfg.sim.omega_const(static_cast<int>(r), static_cast<int>(c)) =
                        rows[r][c].get<double>();
                }
            }
            if (static_cast<int>(rows.size()) != d) {
                throw ConfigError("config: omega.constant dimension mismatch");
            }
        }
    }

    // Resolved canonical form; a manifest built from this text is itself a
    // valid config.
    json resolved = j;
    resolved["design"]["b_targ"] = design.b_targ;
    resolved["alpha"] = cfg.sim.alpha;
    resolved["seed"] = design.master_seed;
    resolved.erase("config_hash");
    resolved.erase("version");
    cfg.canonical = resolved.dump(2);
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

Superpopulation load_source(const SuperpopSource& source) {
    if (source.kind == SuperpopSource::Kind::synthetic) {
        return synthetic_superpopulation(source.n, source.seed, source.form);
    }
    return load_superpopulation(source.path, source.schema);
}

void resolve_strata(RunConfig& config, const Superpopulation& superpop) {
    if (!config.strata_assignment_col.has_value()) return;
    int col = feature_index(superpop.columns, *config.strata_assignment_col,
                            "strategy.strata.assignment_col");
    std::vector<double> values(superpop.proxy.rows());
    for (int i = 0; i < superpop.proxy.rows(); ++i) values[i] = superpop.proxy(i, col);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    std::vector<double> breaks;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        breaks.push_back(0.5 * (values[i] + values[i + 1]));
    }
    config.sim.strategy.strata.cols = {col};
    config.sim.strategy.strata.breakpoints = {std::move(breaks)};
}

std::string config_hash(const std::string& canonical) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace mpd
