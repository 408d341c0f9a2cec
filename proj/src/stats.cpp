#include "mpd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mpd::stats {

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("normal_quantile: p must lie in (0,1)");
    }
    // Acklam's rational approximation.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley step against the exact CDF.
    double e = normal_cdf(x) - p;
    double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("mean of empty vector");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
    double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

double skewness(const std::vector<double>& v) {
    double m = mean(v);
    double m2 = 0.0, m3 = 0.0;
    for (double x : v) {
        double dx = x - m;
        m2 += dx * dx;
        m3 += dx * dx * dx;
    }
    double n = static_cast<double>(v.size());
    m2 /= n;
    m3 /= n;
    return m3 / std::pow(m2, 1.5);
}

double excess_kurtosis(const std::vector<double>& v) {
    double m = mean(v);
    double m2 = 0.0, m4 = 0.0;
    for (double x : v) {
        double dx = x - m;
        m2 += dx * dx;
        m4 += dx * dx * dx * dx;
    }
    double n = static_cast<double>(v.size());
    m2 /= n;
    m4 /= n;
    return m4 / (m2 * m2) - 3.0;
}

double weighted_quantile(std::vector<double> values, std::vector<double> weights,
                         double tau) {
    if (values.empty() || values.size() != weights.size()) {
        throw std::invalid_argument("weighted_quantile: bad sample");
    }
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) throw std::invalid_argument("weighted_quantile: zero total weight");
    double acc = 0.0;
    for (std::size_t idx : order) {
        acc += weights[idx];
        if (acc / total >= tau) return values[idx];
    }
    return values[order.back()];
}

double weighted_silverman_bandwidth(const std::vector<double>& values,
                                    const std::vector<double>& weights) {
    double sw = 0.0, sw2 = 0.0, swx = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        sw += weights[i];
        sw2 += weights[i] * weights[i];
        swx += weights[i] * values[i];
    }
    double wm = swx / sw;
    double var = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        var += weights[i] * (values[i] - wm) * (values[i] - wm);
    }
    var /= sw;
    double sd = std::sqrt(var);
    double iqr = weighted_quantile(values, weights, 0.75) -
                 weighted_quantile(values, weights, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (spread <= 0.0) spread = sd > 0.0 ? sd : 1e-12;
    double n_eff = sw * sw / sw2;
    double h = 0.9 * spread * std::pow(n_eff, -0.2);
    return std::max(h, 1e-12);
}

double weighted_kde(const std::vector<double>& values,
                    const std::vector<double>& weights, double at) {
    if (values.empty() || values.size() != weights.size()) {
        throw std::invalid_argument("weighted_kde: bad sample");
    }
    double h = weighted_silverman_bandwidth(values, weights);
    double sw = 0.0, acc = 0.0;
    const double inv_sqrt2pi = 0.3989422804014327;
    for (std::size_t i = 0; i < values.size(); ++i) {
        double z = (at - values[i]) / h;
        acc += weights[i] * inv_sqrt2pi * std::exp(-0.5 * z * z);
        sw += weights[i];
    }
    return acc / (sw * h);
}

}  // namespace mpd::stats
