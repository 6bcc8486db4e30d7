#include "mmlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmlab::stats {

double RunningMoments::stddev() const { return std::sqrt(variance()); }

double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

namespace {

// Central moments m2..m4 with n denominators.
struct CentralMoments {
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
};

CentralMoments central_moments(const std::vector<double>& xs) {
    const double mu = mean(xs);
    CentralMoments m;
    for (double x : xs) {
        const double d = x - mu;
        const double d2 = d * d;
        m.m2 += d2;
        m.m3 += d2 * d;
        m.m4 += d2 * d2;
    }
    const double n = static_cast<double>(xs.size());
    m.m2 /= n;
    m.m3 /= n;
    m.m4 /= n;
    return m;
}

}  // namespace

double sample_stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) throw std::invalid_argument("sample_stddev: need n >= 2");
    const double mu = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

double skewness(const std::vector<double>& xs) {
    const auto m = central_moments(xs);
    if (m.m2 <= 0.0) return 0.0;
    return m.m3 / std::pow(m.m2, 1.5);
}

double excess_kurtosis(const std::vector<double>& xs) {
    const auto m = central_moments(xs);
    if (m.m2 <= 0.0) return 0.0;
    return m.m4 / (m.m2 * m.m2) - 3.0;
}

double percentile(std::vector<double> xs, double p) {
    if (xs.empty()) throw std::invalid_argument("percentile: empty sample");
    std::sort(xs.begin(), xs.end());
    const double rank = p / 100.0 * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return xs[lo] + frac * (xs[hi] - xs[lo]);
}

double jarque_bera_statistic(std::size_t n, double skew, double excess_kurt) {
    return static_cast<double>(n) / 6.0 * (skew * skew + excess_kurt * excess_kurt / 4.0);
}

std::pair<double, double> jarque_bera(const std::vector<double>& xs) {
    if (xs.size() < 2) throw std::invalid_argument("jarque_bera: need n >= 2");
    const double jb = jarque_bera_statistic(xs.size(), skewness(xs), excess_kurtosis(xs));
    return {jb, std::exp(-jb / 2.0)};
}

double ks_statistic_exp1(std::vector<double> xs) {
    if (xs.empty()) throw std::invalid_argument("ks_statistic_exp1: empty sample");
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = 1.0 - std::exp(-xs[i]);
        const double hi = (static_cast<double>(i) + 1.0) / n - f;
        const double lo = f - static_cast<double>(i) / n;
        d = std::max({d, hi, lo});
    }
    return d;
}

double ks_critical_value(std::size_t n, double alpha) {
    const double c = std::sqrt(-std::log(alpha / 2.0) / 2.0);
    return c / std::sqrt(static_cast<double>(n));
}

// Series/continued-fraction evaluation of Q(a, x), the standard split at
// x < a + 1.
double upper_incomplete_gamma_regularized(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw std::invalid_argument("igamc: bad arguments");
    if (x == 0.0) return 1.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        // P(a,x) by series, Q = 1 - P.
        double term = 1.0 / a;
        double sum = term;
        double ap = a;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
        }
        const double p = sum * std::exp(-x + a * std::log(x) - lg);
        return 1.0 - p;
    }
    // Q(a,x) by Lentz continued fraction.
    const double tiny = std::numeric_limits<double>::min() / 1e-30;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - lg);
}

double chi_square_sf(double x, int dof) {
    return upper_incomplete_gamma_regularized(static_cast<double>(dof) / 2.0, x / 2.0);
}

}  // namespace mmlab::stats
