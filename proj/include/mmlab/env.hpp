#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmlab/hawkes.hpp"
#include "mmlab/lob.hpp"
#include "mmlab/rng.hpp"

namespace mmlab {

// Market-making episode environment. Each step of length dt:
//   1. outstanding quotes are cancelled (a quote at the best price cancels
//      aggressively with probability z2 and moves the book),
//   2. the action (offsets from the best prices, in ticks) is quantized and
//      interpreted; a crossed pair is ignored, the constrained side is
//      dropped at the inventory cap,
//   3. a bid at/through the ask (ask at/through the bid) executes as a market
//      order with taker fee, aggressive with probability z1,
//   4. a quote strictly inside the spread improves the best price (a
//      deterministic aggressive limit event), quotes at or behind the best
//      rest passively,
//   5. market events are generated by the Hawkes engine and applied in order;
//      aggressive market orders fill a quote inside their swept interval,
//      non-aggressive ones fill a quote at the best with probability z3,
//   6. reward = wealth change minus phi * integral of |inventory| over the
//      step (piecewise-constant, exact).
// Agent activity feeds back into the Hawkes intensities unless disabled.

struct EnvConfig {
    double dt = 1.0;
    double horizon = 100.0;  // T, a positive multiple of dt
    double tick = 0.01;
    double phi = 0.01;      // running inventory penalty
    int max_inventory = 3;  // c
    double z1 = 8.0 / 30.0;
    double z2 = 0.25;
    double z3 = 0.25;
    double maker_fee = 0.0;   // fraction of price per limit fill
    double taker_fee = 0.002; // fraction of price per market order
    double p0 = 100.0;
    double init_spread_ticks = 2.0;
    int max_offset_ticks = 5;  // A_max
    MarkParams marks{};
    HawkesParams hawkes{};
    CancelTruncation cancel_trunc = CancelTruncation::spread;
    bool round_jumps = false;
    bool agent_feedback = true;

    int n_steps() const;
};

// Throws std::invalid_argument naming the offending field (includes the
// Hawkes stability gate).
void validate_env(const EnvConfig& cfg);

// z-score statistics for the spread and trend features, produced by
// calibrate_normalization.
struct NormStats {
    double mean_spread = 0.0;
    double std_spread = 1.0;
    double mean_trend = 0.0;
    double std_trend = 1.0;
};

struct Observation {
    double inv_n = 0.0;  // inventory, min-max mapped from {-c..c} to [-1,1]
    double spread_n = 0.0;
    double trend_n = 0.0;
};

Observation normalize(int inventory, double spread_ticks, double trend,
                      int max_inventory, const NormStats& norm);

// Raw features plus their normalized form; controllers pick what they need.
struct ObsView {
    int inventory = 0;
    double spread_ticks = 0.0;
    double trend = 0.0;
    Observation norm{};
};

struct StepResult {
    ObsView obs{};
    double reward = 0.0;
    bool done = false;
};

// Trend feature: lambda_{M_b^a} + lambda_{M_b^n} - lambda_{M_s^a} - lambda_{M_s^n}.
double trend_alpha(const HawkesParams& params, const HawkesState& state);

// Eq-style fill counters: limit bid/ask fills and the agent's own market
// buys/sells. inventory - initial == limit_bid_fills - limit_ask_fills +
// market_buys - market_sells at every step boundary.
struct AgentCounters {
    std::int64_t limit_bid_fills = 0;
    std::int64_t limit_ask_fills = 0;
    std::int64_t market_buys = 0;
    std::int64_t market_sells = 0;
};

struct FillRecord {
    double time = 0.0;
    // 'b': agent limit bid filled, 'a': agent limit ask filled,
    // 'B': agent market buy, 'S': agent market sell.
    char kind = 'b';
    double price = 0.0;      // execution price
    double fee = 0.0;        // fee amount in currency
    double cash_delta = 0.0;
    double mid = 0.0;        // mid right after the triggering event
    int inventory_after = 0;
};

struct TracedEvent {
    MarkedEvent ev{};
    double bid_after = 0.0;
    double ask_after = 0.0;
    int inventory_before = 0;
};

struct StepTraceRow {
    double t = 0.0;
    int inventory = 0;
    double cash = 0.0;
    double bid = 0.0;
    double ask = 0.0;
    int off_a = 0;
    int off_b = 0;
    int fills = 0;
    double reward = 0.0;
};

class MarketMakingEnv {
public:
    MarketMakingEnv(EnvConfig cfg, NormStats norm, std::uint64_t seed);

    ObsView reset();
    StepResult step(double off_a_raw, double off_b_raw);

    bool done() const { return done_; }
    double time() const { return t_; }
    int inventory() const { return inventory_; }
    double cash() const { return cash_; }
    const BookTop& book() const { return book_; }
    double wealth() const { return inventory_ * book_.mid() + cash_; }
    const AgentCounters& counters() const { return counters_; }

    // Active (unfilled) quote prices, when posted this step.
    std::optional<double> bid_quote_price() const {
        return bid_quote_.exists && bid_quote_.active ? std::optional<double>(bid_quote_.price)
                                                      : std::nullopt;
    }
    std::optional<double> ask_quote_price() const {
        return ask_quote_.exists && ask_quote_.active ? std::optional<double>(ask_quote_.price)
                                                      : std::nullopt;
    }

    int trades() const { return trades_; }
    double episode_return() const { return return_sum_; }
    double inventory_integral() const { return inv_integral_; }
    // Mean absolute position over the step boundaries seen so far.
    double map() const;

    const HawkesParams& hawkes_params() const { return cfg_.hawkes; }
    const HawkesState& hawkes_state() const { return hawkes_; }
    const EnvConfig& config() const { return cfg_; }

    void set_trace(bool on) { trace_ = on; }
    const std::vector<TracedEvent>& event_log() const { return event_log_; }
    const std::vector<FillRecord>& fill_log() const { return fill_log_; }
    const std::vector<StepTraceRow>& step_log() const { return step_log_; }
    const BookTop& initial_book() const { return book0_; }

private:
    struct Quote {
        double price = 0.0;
        bool exists = false;
        bool active = false;
    };

    ObsView observe() const;
    void record_event(const MarkedEvent& ev);
    void inject(int dim, double time);
    void execute_market_order(bool buy, double time);
    void fill_quote(bool bid_side, double price, double time, double& last_change,
                    double& inv_integral);
    void process_market_event(EventType et, double time, double& last_change,
                              double& inv_integral);

    EnvConfig cfg_;
    NormStats norm_;
    std::uint64_t seed_;
    Rng market_rng_;
    Rng agent_rng_;

    HawkesState hawkes_;
    BookTop book_;
    BookTop book0_;
    Quote bid_quote_;
    Quote ask_quote_;
    int inventory_ = 0;
    double cash_ = 0.0;
    double t_ = 0.0;
    int step_idx_ = 0;
    bool done_ = false;

    AgentCounters counters_;
    int trades_ = 0;
    double return_sum_ = 0.0;
    double inv_integral_ = 0.0;
    double abs_inv_sum_ = 0.0;

    bool trace_ = false;
    std::vector<TracedEvent> event_log_;
    std::vector<FillRecord> fill_log_;
    std::vector<StepTraceRow> step_log_;
};

// Runs a uniformly random controller for n_steps env steps (spanning as many
// episodes as needed) and returns streaming mean/std of the raw spread and
// trend features. Throws on degenerate variance.
NormStats calibrate_normalization(const EnvConfig& cfg, std::uint64_t seed,
                                  int n_steps = 100000);

// One full episode under a controller; used by calibration, grid search,
// training evaluation and the backtest harness.
struct EpisodeResult {
    double pnl = 0.0;           // terminal wealth W_T
    double episode_return = 0.0;
    int terminal_inventory = 0;
    double map = 0.0;
    int n_trades = 0;
    double inv_integral = 0.0;
};

using ActFn = std::function<std::pair<double, double>(const ObsView&)>;

EpisodeResult play_episode(MarketMakingEnv& env, const ActFn& act);

}  // namespace mmlab
