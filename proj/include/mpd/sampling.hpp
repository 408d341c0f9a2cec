#pragma once

#include <functional>

#include "mpd/types.hpp"

namespace mpd {

// A labelling rule: deterministic map from the cheap feature vector to a
// probability in [b_targ, 1-b_targ]. Units labelled in an earlier wave get
// labelled_prob recorded instead (their weights terminate at the labelling
// wave, so any in-range value is valid; we pin b_targ for determinism).
struct LabelRule {
    std::function<double(const Vector&)> eval;
    double labelled_prob = 0.0;
};

// Executes wave k of the sampling scheme: records pi and a fresh uniform
// draw for every unit, sets the indicator, and reveals expensive features
// for newly labelled units. Waves must run in order.
void run_wave(ObservedStudy& study, int k, const LabelRule& rule);

// W_i^(k) = [prod_{j<k} (1-I^(j))/(1-pi^(j))] * I^(k)/pi^(k).
Matrix compute_wave_weights(const WaveTrace& traces, int K);

// W_i = sum_k c_k W_i^(k).
Vector aggregate_weights(const Matrix& wave_weights, const Vector& c);

void finalize_weights(ObservedStudy& study);

// I.i.d. reference weights built from fixed limiting rules and the study's
// recorded uniform draws. Test support only.
Vector oracle_iid_weights(const ObservedStudy& study,
                          const std::vector<LabelRule>& fixed_rules);

// pi^(k)(x) * prod_{j<k} (1 - pi^(j)(x)) for k = rules.size().
double cumulative_selection_prob(const std::vector<LabelRule>& rules,
                                 const Vector& cheap);

}  // namespace mpd
