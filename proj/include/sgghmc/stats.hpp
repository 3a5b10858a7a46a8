#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "special.hpp"

namespace sgghmc {

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;  // unbiased sample variance
    std::size_t n = 0;

    double stderr_mean() const { return n > 1 ? std::sqrt(var / static_cast<double>(n)) : 0.0; }
};

// Mean/variance over a range, reduced by a fixed-topology pairwise tree so
// serial and parallel runs aggregate bit-identically in the same order.
namespace detail {

struct Accum {
    double sum = 0.0, sumsq = 0.0;
};

inline Accum pairwise(const std::vector<double>& xs, std::size_t lo, std::size_t hi) {
    if (hi - lo <= 8) {
        Accum a;
        for (std::size_t i = lo; i < hi; ++i) {
            a.sum += xs[i];
            a.sumsq += xs[i] * xs[i];
        }
        return a;
    }
    std::size_t mid = lo + (hi - lo) / 2;
    Accum l = pairwise(xs, lo, mid), r = pairwise(xs, mid, hi);
    return {l.sum + r.sum, l.sumsq + r.sumsq};
}

}  // namespace detail

inline MeanVar mean_var(const std::vector<double>& xs) {
    MeanVar mv;
    mv.n = xs.size();
    if (xs.empty()) return mv;
    detail::Accum a = detail::pairwise(xs, 0, xs.size());
    double n = static_cast<double>(xs.size());
    mv.mean = a.sum / n;
    mv.var = xs.size() > 1 ? std::max(0.0, (a.sumsq - a.sum * a.sum / n) / (n - 1.0)) : 0.0;
    return mv;
}

// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
    if (xs.empty()) throw std::invalid_argument("ks_statistic: empty sample");
    std::sort(xs.begin(), xs.end());
    double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double f = cdf(xs[i]);
        d = std::max(d, std::max((i + 1) / n - f, f - i / n));
    }
    return d;
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        double fa = static_cast<double>(i) / a.size();
        double fb = static_cast<double>(j) / b.size();
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

// Asymptotic KS critical value at level alpha: c(alpha)/sqrt(n_eff),
// c(alpha) = sqrt(-log(alpha/2)/2).
inline double ks_critical(double alpha, double n_effective) {
    return std::sqrt(-0.5 * std::log(0.5 * alpha)) / std::sqrt(n_effective);
}

inline double ks_two_sample_n_effective(std::size_t n, std::size_t m) {
    return static_cast<double>(n) * m / static_cast<double>(n + m);
}

// Wilson score interval for a binomial proportion at z standard deviations.
struct WilsonInterval {
    double lower = 0.0, upper = 1.0;
};

inline WilsonInterval wilson_interval(std::size_t successes, std::size_t trials, double z) {
    if (trials == 0) throw std::invalid_argument("wilson_interval: zero trials");
    double n = static_cast<double>(trials);
    double p = static_cast<double>(successes) / n;
    double z2 = z * z;
    double denom = 1.0 + z2 / n;
    double center = (p + z2 / (2.0 * n)) / denom;
    double high = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - high), std::min(1.0, center + high)};
}

// Least-squares slope of y against x.
inline double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("least_squares_slope: need matched samples, n >= 2");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("least_squares_slope: degenerate abscissae");
    return sxy / sxx;
}

}  // namespace sgghmc
