#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "mmlab/hawkes.hpp"
#include "mmlab/rng.hpp"

namespace mmlab {

// Reduced-form limit order book: only the best bid, best ask and the tick
// size are tracked. Eight event types drive it; the first six are aggressive
// (they move a best price by their jump mark), the last two are trades at the
// touch that leave prices unchanged.

enum class EventType : int {
    market_buy_agg = 0,   // M_b^a: lifts the ask
    market_sell_agg = 1,  // M_s^a: hits the bid
    limit_buy_agg = 2,    // L_b^a: improves the bid
    limit_sell_agg = 3,   // L_s^a: improves the ask
    cancel_buy_agg = 4,   // C_b^a: best bid pulled
    cancel_sell_agg = 5,  // C_s^a: best ask pulled
    market_buy_non = 6,   // M_b^n
    market_sell_non = 7,  // M_s^n
};

inline constexpr int kNumEventTypes = 8;

inline bool is_aggressive(EventType t) { return static_cast<int>(t) < 6; }

// Mid-price direction: E_inc = {M_b^a, L_b^a, C_s^a}, E_dec = {M_s^a, L_s^a, C_b^a}.
inline bool increases_mid(EventType t) {
    return t == EventType::market_buy_agg || t == EventType::limit_buy_agg ||
           t == EventType::cancel_sell_agg;
}
inline bool decreases_mid(EventType t) {
    return t == EventType::market_sell_agg || t == EventType::limit_sell_agg ||
           t == EventType::cancel_buy_agg;
}

std::string_view event_type_name(EventType t);
std::optional<EventType> event_type_from_name(std::string_view name);

// Shifted exponential jump marks: density (1/scale) exp(-(x - loc)/scale) on
// (loc, inf), sizes in ticks.
struct MarkParams {
    double loc = 0.01;
    double scale = 0.08;
};

void validate_marks(const MarkParams& m);

struct MarkedEvent {
    EventType etype = EventType::market_buy_non;
    double time = 0.0;
    double jump_ticks = 0.0;  // 0 for the neutral types
    EventSource source = EventSource::market;
};

struct BookTop {
    double bid = 0.0;
    double ask = 0.0;
    double tick = 0.01;

    double mid() const { return 0.5 * (bid + ask); }
    double spread() const { return ask - bid; }
    double spread_ticks() const { return (ask - bid) / tick; }
};

// Inverse-CDF jump for a given uniform u in (0,1). Without a bound:
// J = loc - scale*ln(1-u). With an upper bound s the distribution is
// truncated to (loc, s); returns nullopt when the support is empty
// (s <= loc), which callers turn into a no-op event.
std::optional<double> jump_from_uniform(double u, const MarkParams& m,
                                        std::optional<double> upper_bound);
std::optional<double> sample_jump(Rng& rng, const MarkParams& m,
                                  std::optional<double> upper_bound);

// Applies one event to the book, in price units of jump_ticks * tick.
// Aggressive limit orders require jump < spread_ticks (the sampler's
// truncation must guarantee it); violations throw std::logic_error.
void apply_event(BookTop& book, const MarkedEvent& ev);

// Closed-form mid consistency: bookT.mid must equal
// book0.mid + (sum_inc J - sum_dec J) * tick / 2 to 1e-9 absolute.
bool mid_price_identity_check(std::span<const MarkedEvent> event_log,
                              const BookTop& book0, const BookTop& bookT);

// Truncation policy for aggressive cancellations. Aggressive limit orders are
// always truncated at the spread (spread positivity requires it).
enum class CancelTruncation { spread, none };

// Marks one raw event with the uniform draw u and applies it to the book:
// limit jumps truncated at the spread, cancel jumps per policy, market jumps
// unbounded, neutral events applied with jump 0. With round_jumps the mark is
// rounded to whole ticks first. Returns the applied event, or nullopt when
// the truncation support was empty (or rounding left no legal jump) and the
// event was demoted to a book no-op.
std::optional<MarkedEvent> mark_and_apply(BookTop& book, EventType et, double time, double u,
                                          const MarkParams& marks,
                                          CancelTruncation cancel_trunc, bool round_jumps,
                                          EventSource source);

}  // namespace mmlab
