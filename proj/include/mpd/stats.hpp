#pragma once

#include <cstddef>
#include <vector>

namespace mpd::stats {

// Standard normal quantile, accurate to ~1e-15 (Acklam initialization plus
// one Halley refinement through erfc).
double normal_quantile(double p);

double normal_cdf(double x);

double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v);  // denominator n
double skewness(const std::vector<double>& v);
double excess_kurtosis(const std::vector<double>& v);

// Smallest value q with (sum of weights of x <= q) / (total weight) >= tau.
// Ties broken toward the smaller value.
double weighted_quantile(std::vector<double> values, std::vector<double> weights,
                         double tau);

// Gaussian-kernel weighted KDE with weighted Silverman bandwidth
// h = 0.9 * min(sd_w, IQR_w / 1.34) * n_eff^(-1/5), n_eff = (sum w)^2 / sum w^2.
double weighted_kde(const std::vector<double>& values,
                    const std::vector<double>& weights, double at);

double weighted_silverman_bandwidth(const std::vector<double>& values,
                                    const std::vector<double>& weights);

}  // namespace mpd::stats
