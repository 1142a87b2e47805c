#pragma once

// Student-t machinery for the baseline-refresh gate: one-sided paired t-test
// with the alternative mean(a - b) < 0.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hpn {

namespace detail {

// Continued fraction for the regularized incomplete beta (Lentz's method).
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::betacf(a, b, x) / a;
    return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

// P(T <= t) for Student's t with df degrees of freedom.
inline double student_t_cdf(double t, double df) {
    if (df <= 0.0) throw std::invalid_argument("student_t_cdf: df must be positive");
    const double x = df / (df + t * t);
    const double tail = 0.5 * inc_beta(0.5 * df, 0.5, x);
    return t <= 0.0 ? tail : 1.0 - tail;
}

// One-sided paired t-test, alternative mean(a - b) < 0. Zero-variance
// differences short-circuit: all zero -> 1, constant negative -> 0,
// constant positive -> 1.
inline double paired_t_test_one_sided(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("paired_t_test_one_sided: length mismatch " +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    const std::size_t n = a.size();
    if (n < 2) throw std::invalid_argument("paired_t_test_one_sided: need at least 2 pairs");

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = (a[i] - b[i]) - mean;
        ss += c * c;
    }
    if (ss == 0.0) {
        if (mean < 0.0) return 0.0;
        return 1.0;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
    return student_t_cdf(t, static_cast<double>(n - 1));
}

}  // namespace hpn
