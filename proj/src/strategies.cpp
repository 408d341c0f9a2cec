#include "mpd/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mpd/inference.hpp"

namespace mpd {

namespace {

constexpr double kRhoFloor = 1e-12;

// Row indices in ascending unit-id order. All strategy reductions iterate in
// this order so permuting the unit table cannot perturb sums through
// floating-point reassociation.
std::vector<int> rows_by_id(const ObservedStudy& study) {
    std::vector<int> rows(study.units.size());
    std::iota(rows.begin(), rows.end(), 0);
    std::sort(rows.begin(), rows.end(), [&](int a, int b) {
        return study.units[a].id < study.units[b].id;
    });
    return rows;
}

}  // namespace

int StrataSpec::stratum_of(const Vector& cheap) const {
    int id = 0;
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto& bp = breakpoints[c];
        double v = cheap[cols[c]];
        int bin = static_cast<int>(std::upper_bound(bp.begin(), bp.end(), v) - bp.begin());
        id = id * (static_cast<int>(bp.size()) + 1) + bin;
    }
    return id;
}

LabelRule uniform_rule(double n_targ_1, int N, double b_targ) {
    double p = n_targ_1 / static_cast<double>(N);
    if (!(p >= b_targ && p <= 1.0 - b_targ)) {
        throw ConfigError("uniform_rule: budget " + std::to_string(n_targ_1) +
                          " incompatible with b_targ");
    }
    LabelRule rule;
    rule.eval = [p](const Vector&) { return p; };
    rule.labelled_prob = b_targ;
    return rule;
}

InterimFit interim_fit(const LossModel& loss, const ObservedStudy& study,
                       int k_star, const Vector& gamma_I,
                       const Matrix& H_gamma_inv, int j) {
    if (k_star < 2) throw ProtocolError("interim_fit: needs at least one completed wave");
    const int n = static_cast<int>(study.units.size());
    const int prior_waves = k_star - 1;
    auto mix = study.design.wave_mix();
    double c_mass = 0.0;
    for (int k = 0; k < prior_waves; ++k) c_mass += mix[k];

    Matrix wave_w = compute_wave_weights(study.traces, prior_waves);
    Vector partial_w = Vector::Zero(n);  // sum_{k<k*} c_k W^(k)
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < prior_waves; ++k) partial_w[i] += mix[k] * wave_w(i, k);
    }

    std::vector<int> labelled_rows;
    for (int i : rows_by_id(study)) {
        if (study.units[i].labelled() && *study.units[i].labelled_wave <= prior_waves) {
            labelled_rows.push_back(i);
        }
    }
    if (static_cast<int>(labelled_rows.size()) < loss.dim() + 1) {
        throw InsufficientData("interim_fit: fewer labelled units than d+1");
    }

    Matrix rows(labelled_rows.size(), study.layout.p);
    Vector w(labelled_rows.size());
    for (std::size_t r = 0; r < labelled_rows.size(); ++r) {
        rows.row(static_cast<int>(r)) =
            study.units[labelled_rows[r]].true_features(study.layout).transpose();
        w[static_cast<int>(r)] = partial_w[labelled_rows[r]];
    }

    double n_norm = static_cast<double>(n) * c_mass;
    InterimFit fit;
    fit.theta_interim = solve_weighted_m(loss, rows, w, n_norm);

    WeightedSample ctx;
    const WeightedSample* ctx_ptr = nullptr;
    if (loss.spec().kind == LossKind::quantile) {
        for (std::size_t r = 0; r < labelled_rows.size(); ++r) {
            if (w[static_cast<int>(r)] == 0.0) continue;
            ctx.values.push_back(loss.response(rows.row(static_cast<int>(r)).transpose()));
            ctx.weights.push_back(w[static_cast<int>(r)]);
        }
        ctx_ptr = &ctx;
    }

    Matrix h = Matrix::Zero(loss.dim(), loss.dim());
    for (int r = 0; r < rows.rows(); ++r) {
        if (w[r] == 0.0) continue;
        h += w[r] * loss.hessian(fit.theta_interim, rows.row(r).transpose(), ctx_ptr);
    }
    fit.H_interim = h / n_norm;

    Matrix h_inv = stable_inverse(fit.H_interim, "interim Hessian");
    Vector ej = Vector::Zero(loss.dim());
    if (j < 0 || j >= loss.dim()) throw ConfigError("interim_fit: bad target coordinate");
    ej[j] = 1.0;
    Vector a = h_inv.transpose() * ej;         // e_j^T H^-1 as column
    Vector b = H_gamma_inv.transpose() * ej;
    for (std::size_t r = 0; r < labelled_rows.size(); ++r) {
        int i = labelled_rows[r];
        double term = a.dot(loss.gradient(fit.theta_interim,
                                          rows.row(static_cast<int>(r)).transpose())) -
                      b.dot(loss.gradient(gamma_I, study.units[i].cheap));
        fit.psi_values[study.units[i].id] = term * term;
    }
    return fit;
}

KnnRho::KnnRho(Matrix train_features, std::vector<double> responses,
               std::vector<int> ids, int k_neighbors)
    : responses_(std::move(responses)), ids_(std::move(ids)), k_(k_neighbors) {
    if (train_features.rows() == 0) throw InsufficientData("knn_rho: empty training set");
    if (k_ < 1) throw ConfigError("knn_rho: k_neighbors must be >= 1");
    const int p = static_cast<int>(train_features.cols());
    mean_ = train_features.colwise().mean();
    scale_ = Vector::Ones(p);
    for (int c = 0; c < p; ++c) {
        double var = (train_features.col(c).array() - mean_[c]).square().mean();
        double sd = std::sqrt(var);
        scale_[c] = sd > 0.0 ? sd : 1.0;
    }
    z_ = train_features;
    for (int c = 0; c < p; ++c) {
        z_.col(c) = (z_.col(c).array() - mean_[c]) / scale_[c];
    }
}

double KnnRho::operator()(const Vector& query) const {
    const int n = static_cast<int>(z_.rows());
    Vector q = (query.array() - mean_.array()) / scale_.array();
    std::vector<std::pair<double, int>> dist(n);  // (distance, train row)
    for (int i = 0; i < n; ++i) {
        dist[i] = {(z_.row(i).transpose() - q).norm(), i};
    }
    int k = std::min(k_, n);
    // ties broken by ascending unit id
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end(),
                      [&](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first < b.first;
                          return ids_[a.second] < ids_[b.second];
                      });
    double acc = 0.0;
    for (int i = 0; i < k; ++i) acc += responses_[dist[i].second];
    return acc / k;
}

StratifiedRho::StratifiedRho(const StrataSpec& spec, const ObservedStudy& study,
                             int k_star,
                             const std::unordered_map<int, double>& psi_values)
    : spec_(spec) {
    const int prior_waves = k_star - 1;
    auto mix = study.design.wave_mix();
    double c_mass = 0.0;
    for (int k = 0; k < prior_waves; ++k) c_mass += mix[k];

    Matrix wave_w = compute_wave_weights(study.traces, prior_waves);
    const int L = spec_.stratum_count();
    std::vector<double> num(L, 0.0);
    std::vector<double> count(L, 0.0);
    for (int i : rows_by_id(study)) {
        int r = spec_.stratum_of(study.units[i].cheap);
        count[r] += 1.0;
        auto it = psi_values.find(study.units[i].id);
        if (it == psi_values.end()) continue;
        double cw = 0.0;
        for (int k = 0; k < prior_waves; ++k) cw += mix[k] * wave_w(i, k);
        num[r] += cw * it->second;
    }
    rho_.resize(L);
    for (int r = 0; r < L; ++r) {
        if (count[r] == 0.0) {
            throw ConfigError("stratified_rho: stratum " + std::to_string(r) +
                              " holds no Phase-I units");
        }
        rho_[r] = num[r] / (count[r] * c_mass);
    }
}

double StratifiedRho::operator()(const Vector& query) const {
    return rho_[spec_.stratum_of(query)];
}

std::function<double(const Vector&)> greedy_init_rule(
    std::function<double(const Vector&)> rho_hat,
    std::vector<LabelRule> prior_rules) {
    return [rho = std::move(rho_hat),
            rules = std::move(prior_rules)](const Vector& x) {
        double intensity = std::sqrt(std::max(rho(x), kRhoFloor));
        for (const auto& rule : rules) {
            double pi = rule.eval(x);
            if (pi >= 1.0) {
                throw OverlapViolation("greedy_init_rule: prior rule reaches 1");
            }
            intensity /= std::sqrt(1.0 - pi);
        }
        return intensity;
    };
}

double TrimTransform::apply(double intensity) const {
    double t = std::clamp(scale * intensity, b, 1.0 - b);
    if (branch == 1) return b + alpha * (t - b);
    if (branch == 2) return (1.0 - b) - alpha * ((1.0 - b) - t);
    return t;
}

TrimTransform fit_trim_transform(const std::vector<double>& intensities,
                                 double n_targ_k, double b_targ) {
    const double m = static_cast<double>(intensities.size());
    if (!(b_targ < n_targ_k / m && n_targ_k / m < 1.0 - b_targ)) {
        throw ConfigError("enforce_budget_overlap: budget infeasible for overlap bound");
    }
    double total = std::accumulate(intensities.begin(), intensities.end(), 0.0);
    if (!(total > 0.0)) throw ConfigError("enforce_budget_overlap: nonpositive intensity mass");

    TrimTransform t;
    t.scale = n_targ_k / total;
    t.b = b_targ;
    double n_trim = 0.0;
    for (double v : intensities) {
        n_trim += std::clamp(t.scale * v, b_targ, 1.0 - b_targ);
    }
    if (n_trim > n_targ_k) {
        t.branch = 1;
        t.alpha = (n_targ_k - b_targ * m) / (n_trim - b_targ * m);
    } else if (n_trim < n_targ_k) {
        t.branch = 2;
        t.alpha = ((1.0 - b_targ) * m - n_targ_k) / ((1.0 - b_targ) * m - n_trim);
    }
    return t;
}

std::vector<double> enforce_budget_overlap(const std::vector<double>& intensities,
                                           double n_targ_k, double b_targ) {
    TrimTransform t = fit_trim_transform(intensities, n_targ_k, b_targ);
    std::vector<double> out(intensities.size());
    for (std::size_t i = 0; i < intensities.size(); ++i) out[i] = t.apply(intensities[i]);
    return out;
}

LabelRule build_wave_rule(const LossModel& loss, const StrategyConfig& config,
                          const ObservedStudy& study, int k_star,
                          const std::vector<LabelRule>& prior_rules,
                          const Vector& gamma_I, const Matrix& H_gamma,
                          bool* fallback) {
    if (k_star < 1) throw ProtocolError("build_wave_rule: bad wave index");
    const StudyDesign& design = study.design;
    if (k_star == 1) {
        return uniform_rule(design.wave_budgets[0], design.N, design.b_targ);
    }

    std::vector<int> unlabelled;
    for (int i : rows_by_id(study)) {
        if (!study.units[i].labelled()) unlabelled.push_back(i);
    }
    double n_targ_k = design.wave_budgets[k_star - 1];

    std::function<double(const Vector&)> intensity;
    if (config.kind == StrategyConfig::Kind::uniform) {
        intensity = [](const Vector&) { return 1.0; };
    } else {
        try {
            Matrix h_gamma_inv = stable_inverse(H_gamma, "H_gamma");
            InterimFit fit = interim_fit(loss, study, k_star, gamma_I, h_gamma_inv,
                                         config.target_coordinate);
            std::function<double(const Vector&)> rho;
            if (config.kind == StrategyConfig::Kind::greedy_knn) {
                std::vector<double> psis;
                std::vector<int> ids;
                std::vector<int> rows;
                for (int i : rows_by_id(study)) {
                    auto it = fit.psi_values.find(study.units[i].id);
                    if (it == fit.psi_values.end()) continue;
                    rows.push_back(i);
                    psis.push_back(it->second);
                    ids.push_back(study.units[i].id);
                }
                Matrix feats(rows.size(), study.layout.p);
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    feats.row(static_cast<int>(r)) = study.units[rows[r]].cheap.transpose();
                }
                rho = KnnRho(std::move(feats), std::move(psis), std::move(ids),
                             config.k_neighbors);
            } else {
                rho = StratifiedRho(config.strata, study, k_star, fit.psi_values);
            }
            intensity = greedy_init_rule(std::move(rho), prior_rules);
        } catch (const InsufficientData&) {
            if (fallback != nullptr) *fallback = true;
            intensity = [](const Vector&) { return 1.0; };
        } catch (const SingularMatrix&) {
            if (fallback != nullptr) *fallback = true;
            intensity = [](const Vector&) { return 1.0; };
        }
    }

    std::vector<double> intensities(unlabelled.size());
    for (std::size_t r = 0; r < unlabelled.size(); ++r) {
        intensities[r] = intensity(study.units[unlabelled[r]].cheap);
    }
    TrimTransform transform = fit_trim_transform(intensities, n_targ_k, design.b_targ);

    LabelRule rule;
    rule.labelled_prob = design.b_targ;
    rule.eval = [transform, f = std::move(intensity)](const Vector& x) {
        return transform.apply(f(x));
    };
    return rule;
}

}  // namespace mpd
