#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "mpd/errors.hpp"

namespace mpd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Column layout of the unit feature vector. Positions listed in
// expensive_cols hold proxy values in the cheap view and gold-standard
// measurements in the true view.
struct FeatureLayout {
    int p = 0;
    std::vector<int> expensive_cols;
};

struct UnitRecord {
    int id = 0;
    Vector cheap;       // proxy view, dimension p
    Vector expensive;   // measurements for expensive_cols, gated on labelling
    std::optional<int> labelled_wave;

    bool labelled() const { return labelled_wave.has_value(); }

    // True feature vector: cheap with proxy positions replaced by the
    // measured values. Only readable once the unit has been labelled.
    Vector true_features(const FeatureLayout& layout) const {
        if (!labelled()) {
            throw ProtocolError("expensive features accessed on unlabelled unit " +
                                std::to_string(id));
        }
        Vector x = cheap;
        for (std::size_t c = 0; c < layout.expensive_cols.size(); ++c) {
            x[layout.expensive_cols[c]] = expensive[static_cast<int>(c)];
        }
        return x;
    }
};

// Per-unit, per-wave sampling record: labelling probability, uniform draw,
// and the resulting indicator.
struct WaveTrace {
    Matrix pi;               // N x K
    Matrix u;                // N x K
    Eigen::MatrixXi indicator;  // N x K

    void resize(int n, int k) {
        pi = Matrix::Zero(n, k);
        u = Matrix::Zero(n, k);
        indicator = Eigen::MatrixXi::Zero(n, k);
    }
};

struct MultiwaveWeights {
    Matrix wave_weights;  // N x K
    Vector aggregated;    // N
    Vector c;             // K, sums to 1
};

struct StudyDesign {
    int N = 0;
    int K = 0;
    std::vector<double> wave_budgets;  // expected labels per wave
    std::vector<double> c;             // wave mix; empty -> budget-proportional
    double b_targ = 0.0;
    std::uint64_t master_seed = 0;

    double total_budget() const {
        double s = 0.0;
        for (double b : wave_budgets) s += b;
        return s;
    }

    std::vector<double> wave_mix() const {
        if (!c.empty()) return c;
        std::vector<double> mix(wave_budgets.size());
        double total = total_budget();
        for (std::size_t k = 0; k < wave_budgets.size(); ++k) mix[k] = wave_budgets[k] / total;
        return mix;
    }

    void validate() const {
        if (K < 1) throw ConfigError("design: K must be >= 1");
        if (N < 1) throw ConfigError("design: N must be >= 1");
        if (static_cast<int>(wave_budgets.size()) != K) {
            throw ConfigError("design: wave_budgets must have K entries");
        }
        for (double b : wave_budgets) {
            if (b <= 0.0) throw ConfigError("design: wave budgets must be positive");
        }
        if (!(b_targ > 0.0 && b_targ < 0.5)) {
            throw ConfigError("design: b_targ must lie in (0, 1/2)");
        }
        for (double b : wave_budgets) {
            if (!(b_targ < b / N)) {
                throw ConfigError("design: b_targ must be below n_targ^(k)/N for every wave");
            }
        }
        if (!c.empty()) {
            if (static_cast<int>(c.size()) != K) throw ConfigError("design: c must have K entries");
            double s = 0.0;
            for (double ck : c) {
                if (ck < 0.0 || ck > 1.0) throw ConfigError("design: c_k must lie in [0,1]");
                s += ck;
            }
            if (std::abs(s - 1.0) > 1e-12) throw ConfigError("design: c must sum to 1");
        }
    }
};

struct ObservedStudy {
    std::vector<UnitRecord> units;
    FeatureLayout layout;
    WaveTrace traces;
    MultiwaveWeights weights;
    StudyDesign design;
    std::uint64_t rep_index = 0;  // selects the random stream family
    std::uint64_t stream_purpose_base = 0;  // rng::kWaveBase or kBaselineWave
    int waves_done = 0;
};

}  // namespace mpd
