#include "mmlab/hawkes.hpp"

#include <cmath>
#include <stdexcept>

namespace mmlab {

void validate_hawkes(const HawkesParams& params) {
    const int n = params.dim;
    if (n <= 0) throw std::invalid_argument("hawkes.dim: must be positive");
    const auto sz = static_cast<std::size_t>(n);
    if (params.mu.size() != sz) throw std::invalid_argument("hawkes.mu: wrong length");
    if (params.alpha.size() != sz * sz) throw std::invalid_argument("hawkes.alpha: wrong shape");
    if (params.beta.size() != sz * sz) throw std::invalid_argument("hawkes.beta: wrong shape");
    for (int k = 0; k < n; ++k) {
        if (!(params.mu[k] >= 0.0))
            throw std::invalid_argument("hawkes.mu[" + std::to_string(k) + "]: must be >= 0");
        for (int l = 0; l < n; ++l) {
            const double a = params.a(k, l);
            if (!(a >= 0.0))
                throw std::invalid_argument("hawkes.alpha[" + std::to_string(k) + "][" +
                                            std::to_string(l) + "]: must be >= 0");
            if (a > 0.0 && !(params.b(k, l) > 0.0))
                throw std::invalid_argument("hawkes.beta[" + std::to_string(k) + "][" +
                                            std::to_string(l) + "]: must be > 0 where alpha > 0");
        }
    }
    const double rho = branching_spectral_radius(params);
    if (!(rho < 1.0))
        throw std::invalid_argument("hawkes.alpha: branching spectral radius " +
                                    std::to_string(rho) + " >= 1 (non-stationary)");
}

HawkesState make_hawkes_state(const HawkesParams& params) {
    HawkesState s;
    s.dim = params.dim;
    const auto n = static_cast<std::size_t>(params.dim);
    s.excitation.assign(n * n, 0.0);
    s.event_counts.assign(n, 0);
    s.compensator.assign(n, 0.0);
    return s;
}

std::vector<double> intensity(const HawkesParams& params, const HawkesState& state) {
    if (state.dim != params.dim)
        throw std::invalid_argument("hawkes: state/params dimension mismatch");
    const int n = params.dim;
    std::vector<double> lam(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        double s = params.mu[k];
        const double* row = &state.excitation[static_cast<std::size_t>(k) * n];
        for (int l = 0; l < n; ++l) s += row[l];
        lam[k] = s;
    }
    return lam;
}

double total_intensity(const HawkesParams& params, const HawkesState& state) {
    const int n = params.dim;
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += params.mu[k];
    for (double e : state.excitation) s += e;
    return s;
}

void advance(const HawkesParams& params, HawkesState& state, double dt) {
    if (dt < 0.0) throw std::invalid_argument("hawkes.advance: dt must be >= 0");
    const int n = params.dim;
    if (dt > 0.0) {
        for (int k = 0; k < n; ++k) {
            double integral = params.mu[k] * dt;
            double* row = &state.excitation[static_cast<std::size_t>(k) * n];
            const double* brow = &params.beta[static_cast<std::size_t>(k) * n];
            for (int l = 0; l < n; ++l) {
                const double e = row[l];
                if (e == 0.0) continue;
                const double decay = std::exp(-brow[l] * dt);
                integral += e * (1.0 - decay) / brow[l];
                row[l] = e * decay;
            }
            state.compensator[k] += integral;
        }
    }
    state.t += dt;
}

namespace {

void apply_excitation_column(const HawkesParams& params, HawkesState& state, int l) {
    const int n = params.dim;
    for (int k = 0; k < n; ++k)
        state.excitation[static_cast<std::size_t>(k) * n + l] += params.a(k, l);
    ++state.event_counts[l];
}

}  // namespace

void inject_event(const HawkesParams& params, HawkesState& state, int dim_index,
                  double time, EventSource) {
    if (dim_index < 0 || dim_index >= params.dim)
        throw std::invalid_argument("hawkes.inject_event: dimension out of range");
    if (time < state.t)
        throw std::invalid_argument("hawkes.inject_event: event time precedes state time");
    advance(params, state, time - state.t);
    apply_excitation_column(params, state, dim_index);
}

std::optional<RawEvent> next_event(const HawkesParams& params, HawkesState& state,
                                   Rng& rng, double t_max) {
    if (state.t > t_max)
        throw std::invalid_argument("hawkes.next_event: state already past t_max");
    const int n = params.dim;
    std::vector<double> lam(static_cast<std::size_t>(n));
    for (;;) {
        const double bound = total_intensity(params, state);
        if (bound <= 0.0) {
            advance(params, state, t_max - state.t);
            return std::nullopt;
        }
        const double wait = exponential(rng, bound);
        if (state.t + wait > t_max) {
            advance(params, state, t_max - state.t);
            return std::nullopt;
        }
        advance(params, state, wait);
        double sum = 0.0;
        for (int k = 0; k < n; ++k) {
            double s = params.mu[k];
            const double* row = &state.excitation[static_cast<std::size_t>(k) * n];
            for (int l = 0; l < n; ++l) s += row[l];
            lam[k] = s;
            sum += s;
        }
        if (uniform01(rng) * bound <= sum) {
            double v = uniform01(rng) * sum;
            int pick = n - 1;
            double cum = 0.0;
            for (int k = 0; k < n; ++k) {
                cum += lam[k];
                if (v < cum) {
                    pick = k;
                    break;
                }
            }
            apply_excitation_column(params, state, pick);
            return RawEvent{state.t, pick, EventSource::market};
        }
    }
}

double branching_spectral_radius(const HawkesParams& params) {
    const int n = params.dim;
    std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            const double al = params.a(k, l);
            if (al > 0.0) a[static_cast<std::size_t>(k) * n + l] = al / params.b(k, l);
        }
    std::vector<double> x(static_cast<std::size_t>(n), 1.0);
    {
        const double nx = std::sqrt(static_cast<double>(n));
        for (double& v : x) v /= nx;
    }
    std::vector<double> y(static_cast<std::size_t>(n));
    double estimate = 0.0;
    for (int iter = 0; iter < 10000; ++iter) {
        double ny = 0.0;
        for (int k = 0; k < n; ++k) {
            double s = 0.0;
            const double* row = &a[static_cast<std::size_t>(k) * n];
            for (int l = 0; l < n; ++l) s += row[l] * x[l];
            y[k] = s;
            ny += s * s;
        }
        ny = std::sqrt(ny);
        if (ny == 0.0) return 0.0;
        const double prev = estimate;
        estimate = ny;
        for (int k = 0; k < n; ++k) x[k] = y[k] / ny;
        if (iter > 0 && std::fabs(estimate - prev) < 1e-10) break;
    }
    return estimate;
}

std::vector<double> stationary_rates(const HawkesParams& params) {
    const int n = params.dim;
    // Solve (I - A) r = mu by Gaussian elimination with partial pivoting.
    std::vector<double> m(static_cast<std::size_t>(n) * (n + 1));
    for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
            const double al = params.a(k, l);
            const double a = al > 0.0 ? al / params.b(k, l) : 0.0;
            m[static_cast<std::size_t>(k) * (n + 1) + l] = (k == l ? 1.0 : 0.0) - a;
        }
        m[static_cast<std::size_t>(k) * (n + 1) + n] = params.mu[k];
    }
    auto at = [&](int r, int c) -> double& { return m[static_cast<std::size_t>(r) * (n + 1) + c]; };
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::fabs(at(r, col)) > std::fabs(at(pivot, col))) pivot = r;
        if (std::fabs(at(pivot, col)) < 1e-14)
            throw std::runtime_error("stationary_rates: singular system");
        if (pivot != col)
            for (int c = col; c <= n; ++c) std::swap(at(pivot, c), at(col, c));
        for (int r = col + 1; r < n; ++r) {
            const double f = at(r, col) / at(col, col);
            for (int c = col; c <= n; ++c) at(r, c) -= f * at(col, c);
        }
    }
    std::vector<double> rates(static_cast<std::size_t>(n));
    for (int r = n - 1; r >= 0; --r) {
        double s = at(r, n);
        for (int c = r + 1; c < n; ++c) s -= at(r, c) * rates[c];
        rates[r] = s / at(r, r);
    }
    return rates;
}

}  // namespace mmlab
