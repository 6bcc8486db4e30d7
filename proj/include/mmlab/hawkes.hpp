#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmlab/rng.hpp"

namespace mmlab {

// Linear multivariate Hawkes process with exponential kernels. The intensity
// of dimension k is
//   lambda_k(t) = mu[k] + sum_l excitation[k][l],
// where each excitation entry decays as exp(-beta[k][l] * dt) between events
// and jumps by alpha[k][l] when an event arrives in dimension l. That matrix
// is a full Markovian sufficient statistic, so no event history is kept.

struct HawkesParams {
    int dim = 0;
    std::vector<double> mu;     // dim, baseline intensities, >= 0
    std::vector<double> alpha;  // dim x dim row-major, excitation jumps, >= 0
    std::vector<double> beta;   // dim x dim row-major, decay rates, > 0 where alpha > 0

    double a(int k, int l) const { return alpha[static_cast<std::size_t>(k) * dim + l]; }
    double b(int k, int l) const { return beta[static_cast<std::size_t>(k) * dim + l]; }
};

// Throws std::invalid_argument naming the offending entry. Checks shapes,
// sign constraints and the stationarity gate (spectral radius < 1).
void validate_hawkes(const HawkesParams& params);

enum class EventSource : std::uint8_t { market, agent };

struct RawEvent {
    double time = 0.0;
    int dim_index = 0;
    EventSource source = EventSource::market;
};

struct HawkesState {
    double t = 0.0;
    int dim = 0;
    std::vector<double> excitation;        // dim x dim row-major
    std::vector<std::int64_t> event_counts;  // dim
    std::vector<double> compensator;       // dim, integral of lambda_k over [0, t]
};

HawkesState make_hawkes_state(const HawkesParams& params);

// lambda_k(state.t) for every k. No state mutation.
std::vector<double> intensity(const HawkesParams& params, const HawkesState& state);
double total_intensity(const HawkesParams& params, const HawkesState& state);

// Closed-form decay over dt >= 0. Also accumulates the per-dimension
// integrated intensity into state.compensator.
void advance(const HawkesParams& params, HawkesState& state, double dt);

// Advance to `time`, then apply the excitation jump of one event in
// dim_index. `time` must not precede state.t.
void inject_event(const HawkesParams& params, HawkesState& state, int dim_index,
                  double time, EventSource source = EventSource::agent);

// Ogata's modified thinning. Returns the next event before t_max and leaves
// the state at the event time, or nullopt with the state advanced to t_max.
// The dominating rate is refreshed after every candidate, which is valid
// because intensities only decay between arrivals.
std::optional<RawEvent> next_event(const HawkesParams& params, HawkesState& state,
                                   Rng& rng, double t_max);

// Spectral radius of the branching matrix A[k][l] = alpha[k][l] / beta[k][l],
// by power iteration (tolerance 1e-10, 10000 iteration cap, start vector of
// ones).
double branching_spectral_radius(const HawkesParams& params);

// Stationary event rates (I - A)^{-1} mu of a stable process; used by tests
// and the stability diagnostics.
std::vector<double> stationary_rates(const HawkesParams& params);

}  // namespace mmlab
