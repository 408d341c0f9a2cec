#pragma once

// Shared builders for the test suites.

#include <cmath>
#include <vector>

#include "mpd/rng.hpp"
#include "mpd/sampling.hpp"
#include "mpd/stats.hpp"
#include "mpd/types.hpp"

namespace testhelp {

using mpd::LabelRule;
using mpd::Matrix;
using mpd::ObservedStudy;
using mpd::UnitRecord;
using mpd::Vector;

inline LabelRule constant_rule(double p) {
    LabelRule rule;
    rule.eval = [p](const Vector&) { return p; };
    rule.labelled_prob = p;
    return rule;
}

// Deterministic two-feature population: x0 standard normal shape, x1 a
// scaled sine of the index. Reused wherever a fixed superpopulation is
// enough.
inline Vector unit_features(int id) {
    Vector x(2);
    x[0] = mpd::stats::normal_quantile((id % 997 + 0.5) / 997.0);
    x[1] = std::sin(0.1 * id) * 2.0;
    return x;
}

// Fresh study over the fixed population; no waves run yet.
inline ObservedStudy make_study(int N, int K, double b_targ, std::uint64_t seed,
                                std::uint64_t rep = 0) {
    ObservedStudy study;
    study.design.N = N;
    study.design.K = K;
    study.design.b_targ = b_targ;
    study.design.master_seed = seed;
    study.design.wave_budgets.assign(K, N * 0.1);
    study.rep_index = rep;
    study.stream_purpose_base = mpd::rng::kWaveBase;
    study.traces.resize(N, K);
    study.layout.p = 2;
    study.units.resize(N);
    for (int i = 0; i < N; ++i) {
        study.units[i].id = i;
        study.units[i].cheap = unit_features(i);
        study.units[i].expensive.resize(0);
    }
    return study;
}

// Mildly feature-dependent fixed (non-adaptive) rules for K waves.
inline std::vector<LabelRule> fixed_rules(int K) {
    std::vector<LabelRule> rules;
    for (int k = 0; k < K; ++k) {
        double base = 0.10 + 0.03 * k;
        LabelRule rule;
        rule.eval = [base](const Vector& x) {
            return base + 0.05 / (1.0 + std::exp(-x[0]));
        };
        rule.labelled_prob = base;
        rules.push_back(rule);
    }
    return rules;
}

inline void run_fixed_waves(ObservedStudy& study, const std::vector<LabelRule>& rules) {
    for (int k = 1; k <= static_cast<int>(rules.size()); ++k) {
        mpd::run_wave(study, k, rules[static_cast<std::size_t>(k - 1)]);
    }
    mpd::finalize_weights(study);
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
    double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace testhelp
