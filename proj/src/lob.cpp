#include "mmlab/lob.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace mmlab {

namespace {
constexpr std::array<std::string_view, kNumEventTypes> kNames = {
    "M_b^a", "M_s^a", "L_b^a", "L_s^a", "C_b^a", "C_s^a", "M_b^n", "M_s^n"};
}

std::string_view event_type_name(EventType t) {
    return kNames[static_cast<std::size_t>(t)];
}

std::optional<EventType> event_type_from_name(std::string_view name) {
    for (int i = 0; i < kNumEventTypes; ++i)
        if (kNames[static_cast<std::size_t>(i)] == name) return static_cast<EventType>(i);
    return std::nullopt;
}

void validate_marks(const MarkParams& m) {
    if (!(m.loc > 0.0)) throw std::invalid_argument("marks.loc: must be > 0");
    if (!(m.scale > 0.0)) throw std::invalid_argument("marks.scale: must be > 0");
}

std::optional<double> jump_from_uniform(double u, const MarkParams& m,
                                        std::optional<double> upper_bound) {
    if (!upper_bound) return m.loc - m.scale * std::log1p(-u);
    const double s = *upper_bound;
    if (s <= m.loc) return std::nullopt;
    const double mass = -std::expm1(-(s - m.loc) / m.scale);  // 1 - e^{-(s-loc)/scale}
    return m.loc - m.scale * std::log1p(-u * mass);
}

std::optional<double> sample_jump(Rng& rng, const MarkParams& m,
                                  std::optional<double> upper_bound) {
    return jump_from_uniform(uniform01(rng), m, upper_bound);
}

void apply_event(BookTop& book, const MarkedEvent& ev) {
    const double move = ev.jump_ticks * book.tick;
    switch (ev.etype) {
        case EventType::market_buy_agg:
            book.ask += move;
            break;
        case EventType::market_sell_agg:
            book.bid -= move;
            break;
        case EventType::limit_buy_agg:
            if (ev.jump_ticks >= book.spread_ticks())
                throw std::logic_error("apply_event: limit-order jump >= spread");
            book.bid += move;
            break;
        case EventType::limit_sell_agg:
            if (ev.jump_ticks >= book.spread_ticks())
                throw std::logic_error("apply_event: limit-order jump >= spread");
            book.ask -= move;
            break;
        case EventType::cancel_buy_agg:
            book.bid -= move;
            break;
        case EventType::cancel_sell_agg:
            book.ask += move;
            break;
        case EventType::market_buy_non:
        case EventType::market_sell_non:
            break;
    }
}

bool mid_price_identity_check(std::span<const MarkedEvent> event_log,
                              const BookTop& book0, const BookTop& bookT) {
    double net = 0.0;
    for (const auto& ev : event_log) {
        if (increases_mid(ev.etype))
            net += ev.jump_ticks;
        else if (decreases_mid(ev.etype))
            net -= ev.jump_ticks;
    }
    const double expected = book0.mid() + net * book0.tick / 2.0;
    return std::fabs(bookT.mid() - expected) <= 1e-9;
}

std::optional<MarkedEvent> mark_and_apply(BookTop& book, EventType et, double time, double u,
                                          const MarkParams& marks,
                                          CancelTruncation cancel_trunc, bool round_jumps,
                                          EventSource source) {
    double jump = 0.0;
    if (is_aggressive(et)) {
        std::optional<double> bound;
        if (et == EventType::limit_buy_agg || et == EventType::limit_sell_agg) {
            bound = book.spread_ticks();
        } else if ((et == EventType::cancel_buy_agg || et == EventType::cancel_sell_agg) &&
                   cancel_trunc == CancelTruncation::spread) {
            bound = book.spread_ticks();
        }
        auto j = jump_from_uniform(u, marks, bound);
        if (j && round_jumps) {
            const double r = std::round(*j);
            if (r < 1.0 || (bound && r >= *bound))
                j = std::nullopt;
            else
                j = r;
        }
        if (!j) return std::nullopt;
        jump = *j;
    }
    const MarkedEvent ev{et, time, jump, source};
    apply_event(book, ev);
    return ev;
}

}  // namespace mmlab
