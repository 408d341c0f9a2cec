#include "mpd/sampling.hpp"

#include <cmath>

#include "mpd/rng.hpp"

namespace mpd {

void run_wave(ObservedStudy& study, int k, const LabelRule& rule) {
    if (k != study.waves_done + 1) {
        throw ProtocolError("run_wave: wave " + std::to_string(k) +
                            " requested but " + std::to_string(study.waves_done) +
                            " waves completed");
    }
    if (k < 1 || k > study.design.K) {
        throw ProtocolError("run_wave: wave index out of range");
    }
    const double b = study.design.b_targ;
    const int col = k - 1;
    for (int row = 0; row < static_cast<int>(study.units.size()); ++row) {
        auto& unit = study.units[row];
        double pi;
        if (unit.labelled()) {
            pi = rule.labelled_prob > 0.0 ? rule.labelled_prob : b;
        } else {
            pi = rule.eval(unit.cheap);
        }
        if (!(pi >= b && pi <= 1.0 - b)) {
            throw OverlapViolation("run_wave: probability " + std::to_string(pi) +
                                   " outside [b_targ, 1-b_targ] at unit " +
                                   std::to_string(unit.id));
        }
        // Draws are keyed by unit id, not row, so reordering units carries
        // their uniforms with them.
        double u = rng::uniform(study.design.master_seed, study.rep_index,
                                study.stream_purpose_base + static_cast<std::uint64_t>(k),
                                static_cast<std::uint64_t>(unit.id));
        int ind = (u <= pi) ? 1 : 0;
        study.traces.pi(row, col) = pi;
        study.traces.u(row, col) = u;
        study.traces.indicator(row, col) = ind;
        if (ind == 1 && !unit.labelled()) {
            unit.labelled_wave = k;
        }
    }
    study.waves_done = k;
}

Matrix compute_wave_weights(const WaveTrace& traces, int K) {
    const int n = static_cast<int>(traces.pi.rows());
    Matrix w = Matrix::Zero(n, K);
    for (int i = 0; i < n; ++i) {
        double carry = 1.0;  // prod_{j<k} (1-I)/(1-pi)
        for (int k = 0; k < K; ++k) {
            double pi = traces.pi(i, k);
            if (!(pi > 0.0 && pi < 1.0)) {
                throw OverlapViolation("compute_wave_weights: pi outside (0,1)");
            }
            int ind = traces.indicator(i, k);
            w(i, k) = carry * static_cast<double>(ind) / pi;
            carry *= static_cast<double>(1 - ind) / (1.0 - pi);
        }
    }
    return w;
}

Vector aggregate_weights(const Matrix& wave_weights, const Vector& c) {
    double s = 0.0;
    for (int k = 0; k < c.size(); ++k) {
        if (c[k] < 0.0 || c[k] > 1.0) throw ConfigError("aggregate_weights: c_k outside [0,1]");
        s += c[k];
    }
    if (std::abs(s - 1.0) > 1e-12) throw ConfigError("aggregate_weights: c must sum to 1");
    if (wave_weights.cols() != c.size()) {
        throw ConfigError("aggregate_weights: dimension mismatch");
    }
    return wave_weights * c;
}

void finalize_weights(ObservedStudy& study) {
    auto mix = study.design.wave_mix();
    Vector c = Eigen::Map<const Vector>(mix.data(), static_cast<Eigen::Index>(mix.size()));
    study.weights.wave_weights = compute_wave_weights(study.traces, study.design.K);
    study.weights.aggregated = aggregate_weights(study.weights.wave_weights, c);
    study.weights.c = c;
}

Vector oracle_iid_weights(const ObservedStudy& study,
                          const std::vector<LabelRule>& fixed_rules) {
    const int K = static_cast<int>(fixed_rules.size());
    const int n = static_cast<int>(study.units.size());
    auto mix = study.design.wave_mix();
    Vector c = Eigen::Map<const Vector>(mix.data(), static_cast<Eigen::Index>(mix.size()));
    Matrix w = Matrix::Zero(n, K);
    for (int i = 0; i < n; ++i) {
        const Vector& x = study.units[i].cheap;
        double carry = 1.0;
        for (int k = 0; k < K; ++k) {
            double pi = fixed_rules[k].eval(x);
            if (!(pi > 0.0 && pi < 1.0)) {
                throw OverlapViolation("oracle_iid_weights: pi outside (0,1)");
            }
            int ind = (study.traces.u(i, k) <= pi) ? 1 : 0;
            w(i, k) = carry * static_cast<double>(ind) / pi;
            carry *= static_cast<double>(1 - ind) / (1.0 - pi);
        }
    }
    return aggregate_weights(w, c);
}

double cumulative_selection_prob(const std::vector<LabelRule>& rules,
                                 const Vector& cheap) {
    if (rules.empty()) throw ConfigError("cumulative_selection_prob: no rules");
    double prod = 1.0;
    for (std::size_t j = 0; j + 1 < rules.size(); ++j) {
        prod *= 1.0 - rules[j].eval(cheap);
    }
    return rules.back().eval(cheap) * prod;
}

}  // namespace mpd
