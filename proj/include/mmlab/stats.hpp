#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace mmlab::stats {

// One-pass mean/variance accumulator (Welford).
class RunningMoments {
public:
    void add(double x) {
        ++n_;
        const double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    // Population variance (n denominator).
    double variance() const { return n_ > 0 ? m2_ / static_cast<double>(n_) : 0.0; }
    double stddev() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

double mean(const std::vector<double>& xs);
// Sample standard deviation (n-1 denominator), the convention used for the
// reported PnL dispersion and the Sharpe ratio.
double sample_stddev(const std::vector<double>& xs);
// Moment-based skewness g1 = m3 / m2^(3/2) (population moments).
double skewness(const std::vector<double>& xs);
// Excess kurtosis g2 = m4 / m2^2 - 3 (population moments).
double excess_kurtosis(const std::vector<double>& xs);

// Linear-interpolation percentile: rank = p/100 * (n-1) on the sorted data.
double percentile(std::vector<double> xs, double p);

// Jarque-Bera statistic n/6 * (S^2 + K^2/4) with K the excess kurtosis, and
// its chi-square(2 dof) p-value exp(-JB/2).
double jarque_bera_statistic(std::size_t n, double skew, double excess_kurt);
std::pair<double, double> jarque_bera(const std::vector<double>& xs);

// Two-sided Kolmogorov-Smirnov statistic against Exp(1).
double ks_statistic_exp1(std::vector<double> xs);
// Asymptotic critical value c(alpha)/sqrt(n), c(alpha) = sqrt(-ln(alpha/2)/2).
double ks_critical_value(std::size_t n, double alpha);

// Upper regularized incomplete gamma Q(a, x); chi-square survival function is
// Q(dof/2, x/2). Used by the goodness-of-fit tests.
double upper_incomplete_gamma_regularized(double a, double x);
double chi_square_sf(double x, int dof);

}  // namespace mmlab::stats
