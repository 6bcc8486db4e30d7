#include "mmlab/env.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

#include "mmlab/stats.hpp"

namespace mmlab {

int EnvConfig::n_steps() const { return static_cast<int>(std::llround(horizon / dt)); }

void validate_env(const EnvConfig& cfg) {
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("env.dt: must be > 0");
    if (!(cfg.horizon > 0.0)) throw std::invalid_argument("env.T: must be > 0");
    const double steps = cfg.horizon / cfg.dt;
    if (std::fabs(steps - std::round(steps)) > 1e-9)
        throw std::invalid_argument("env.T: must be a positive multiple of dt");
    if (!(cfg.tick > 0.0)) throw std::invalid_argument("env.tick: must be > 0");
    if (!(cfg.phi >= 0.0)) throw std::invalid_argument("env.phi: must be >= 0");
    if (cfg.max_inventory < 1) throw std::invalid_argument("env.c: must be >= 1");
    if (!(cfg.z1 >= 0.0 && cfg.z1 <= 1.0)) throw std::invalid_argument("env.z1: must be in [0,1]");
    if (!(cfg.z2 >= 0.0 && cfg.z2 <= 1.0)) throw std::invalid_argument("env.z2: must be in [0,1]");
    if (!(cfg.z3 >= 0.0 && cfg.z3 <= 1.0)) throw std::invalid_argument("env.z3: must be in [0,1]");
    if (!(cfg.maker_fee >= 0.0)) throw std::invalid_argument("env.maker_fee: must be >= 0");
    if (!(cfg.taker_fee >= 0.0)) throw std::invalid_argument("env.taker_fee: must be >= 0");
    if (!(cfg.init_spread_ticks > 0.0))
        throw std::invalid_argument("env.init_spread_ticks: must be > 0");
    if (cfg.max_offset_ticks < 1) throw std::invalid_argument("env.a_max: must be >= 1");
    validate_marks(cfg.marks);
    validate_hawkes(cfg.hawkes);
    if (cfg.hawkes.dim != kNumEventTypes)
        throw std::invalid_argument("hawkes.dim: must be 8 for the LOB event taxonomy");
}

Observation normalize(int inventory, double spread_ticks, double trend,
                      int max_inventory, const NormStats& norm) {
    if (!(norm.std_spread > 0.0) || !(norm.std_trend > 0.0))
        throw std::invalid_argument("norm stats: zero standard deviation");
    Observation o;
    o.inv_n = static_cast<double>(inventory) / static_cast<double>(max_inventory);
    o.spread_n = (spread_ticks - norm.mean_spread) / norm.std_spread;
    o.trend_n = (trend - norm.mean_trend) / norm.std_trend;
    return o;
}

double trend_alpha(const HawkesParams& params, const HawkesState& state) {
    const auto lam = intensity(params, state);
    return lam[static_cast<int>(EventType::market_buy_agg)] +
           lam[static_cast<int>(EventType::market_buy_non)] -
           lam[static_cast<int>(EventType::market_sell_agg)] -
           lam[static_cast<int>(EventType::market_sell_non)];
}

namespace {

// Declared tick quantization rule: round half away from zero.
int quantize_offset(double off, int a_max) {
    const double r = std::round(off);
    const double clamped = std::min(std::max(r, -static_cast<double>(a_max)),
                                    static_cast<double>(a_max));
    return static_cast<int>(clamped);
}

}  // namespace

MarketMakingEnv::MarketMakingEnv(EnvConfig cfg, NormStats norm, std::uint64_t seed)
    : cfg_(std::move(cfg)), norm_(norm), seed_(seed) {
    validate_env(cfg_);
    reset();
}

ObsView MarketMakingEnv::reset() {
    market_rng_.seed(derive_seed(seed_, seed_purpose::market));
    agent_rng_.seed(derive_seed(seed_, seed_purpose::agent));
    hawkes_ = make_hawkes_state(cfg_.hawkes);
    book_.tick = cfg_.tick;
    const double half = cfg_.init_spread_ticks * cfg_.tick / 2.0;
    book_.bid = cfg_.p0 - half;
    book_.ask = cfg_.p0 + half;
    book0_ = book_;
    bid_quote_ = Quote{};
    ask_quote_ = Quote{};
    inventory_ = 0;
    cash_ = 0.0;
    t_ = 0.0;
    step_idx_ = 0;
    done_ = false;
    counters_ = AgentCounters{};
    trades_ = 0;
    return_sum_ = 0.0;
    inv_integral_ = 0.0;
    abs_inv_sum_ = 0.0;
    event_log_.clear();
    fill_log_.clear();
    step_log_.clear();
    return observe();
}

ObsView MarketMakingEnv::observe() const {
    ObsView o;
    o.inventory = inventory_;
    o.spread_ticks = book_.spread_ticks();
    o.trend = trend_alpha(cfg_.hawkes, hawkes_);
    o.norm = normalize(inventory_, o.spread_ticks, o.trend, cfg_.max_inventory, norm_);
    return o;
}

void MarketMakingEnv::record_event(const MarkedEvent& ev) {
    if (!trace_) return;
    TracedEvent te;
    te.ev = ev;
    te.bid_after = book_.bid;
    te.ask_after = book_.ask;
    te.inventory_before = inventory_;
    event_log_.push_back(te);
}

void MarketMakingEnv::inject(int dim, double time) {
    if (cfg_.agent_feedback) inject_event(cfg_.hawkes, hawkes_, dim, time, EventSource::agent);
}

void MarketMakingEnv::execute_market_order(bool buy, double time) {
    const double price = buy ? book_.ask : book_.bid;
    const double fee = cfg_.taker_fee * price;
    double cash_delta;
    if (buy) {
        cash_delta = -(price + fee);
        ++inventory_;
        ++counters_.market_buys;
    } else {
        cash_delta = price - fee;
        --inventory_;
        ++counters_.market_sells;
    }
    cash_ += cash_delta;
    ++trades_;
    assert(std::abs(inventory_) <= cfg_.max_inventory);

    if (trace_) {
        // Mark-to-market at the pre-impact mid: the inventory changes first,
        // the price impact of the order is a separate book event below.
        FillRecord f;
        f.time = time;
        f.kind = buy ? 'B' : 'S';
        f.price = price;
        f.fee = fee;
        f.cash_delta = cash_delta;
        f.mid = book_.mid();
        f.inventory_after = inventory_;
        fill_log_.push_back(f);
    }

    const bool aggressive = uniform01(agent_rng_) < cfg_.z1;
    if (aggressive) {
        const EventType et = buy ? EventType::market_buy_agg : EventType::market_sell_agg;
        const auto applied =
            mark_and_apply(book_, et, time, uniform01(agent_rng_), cfg_.marks, cfg_.cancel_trunc,
                           cfg_.round_jumps, EventSource::agent);
        record_event(applied ? *applied : MarkedEvent{et, time, 0.0, EventSource::agent});
        inject(static_cast<int>(et), time);
    } else {
        const EventType et = buy ? EventType::market_buy_non : EventType::market_sell_non;
        record_event(MarkedEvent{et, time, 0.0, EventSource::agent});
        inject(static_cast<int>(et), time);
    }
}

void MarketMakingEnv::fill_quote(bool bid_side, double price, double time,
                                 double& last_change, double& inv_integral) {
    inv_integral += std::abs(inventory_) * (time - last_change);
    last_change = time;
    double cash_delta;
    double fee = cfg_.maker_fee * price;
    if (bid_side) {
        cash_delta = -price * (1.0 + cfg_.maker_fee);
        ++inventory_;
        ++counters_.limit_bid_fills;
        bid_quote_.active = false;
    } else {
        cash_delta = price * (1.0 - cfg_.maker_fee);
        --inventory_;
        ++counters_.limit_ask_fills;
        ask_quote_.active = false;
    }
    cash_ += cash_delta;
    ++trades_;
    assert(std::abs(inventory_) <= cfg_.max_inventory);

    if (trace_) {
        FillRecord f;
        f.time = time;
        f.kind = bid_side ? 'b' : 'a';
        f.price = price;
        f.fee = fee;
        f.cash_delta = cash_delta;
        f.mid = book_.mid();
        f.inventory_after = inventory_;
        fill_log_.push_back(f);
    }
}

void MarketMakingEnv::process_market_event(EventType et, double time,
                                           double& last_change, double& inv_integral) {
    const double pre_bid = book_.bid;
    const double pre_ask = book_.ask;
    std::optional<double> jump;
    double z3_draw = 0.0;

    if (is_aggressive(et)) {
        const auto applied =
            mark_and_apply(book_, et, time, uniform01(market_rng_), cfg_.marks,
                           cfg_.cancel_trunc, cfg_.round_jumps, EventSource::market);
        // Empty truncation support demotes the event to a book no-op; it
        // still occurred (and entered the Hawkes excitation inside
        // next_event), so it is logged with a zero jump.
        record_event(applied ? *applied : MarkedEvent{et, time, 0.0, EventSource::market});
        if (applied) jump = applied->jump_ticks;
    } else {
        z3_draw = uniform01(market_rng_);
        record_event(MarkedEvent{et, time, 0.0, EventSource::market});
    }

    switch (et) {
        case EventType::market_sell_agg:
            if (bid_quote_.active && jump) {
                const double q = bid_quote_.price;
                if (q <= pre_bid && q > pre_bid - *jump * cfg_.tick)
                    fill_quote(true, q, time, last_change, inv_integral);
            }
            break;
        case EventType::market_buy_agg:
            if (ask_quote_.active && jump) {
                const double q = ask_quote_.price;
                if (q >= pre_ask && q < pre_ask + *jump * cfg_.tick)
                    fill_quote(false, q, time, last_change, inv_integral);
            }
            break;
        case EventType::market_sell_non:
            if (bid_quote_.active && bid_quote_.price == book_.bid && z3_draw < cfg_.z3)
                fill_quote(true, bid_quote_.price, time, last_change, inv_integral);
            break;
        case EventType::market_buy_non:
            if (ask_quote_.active && ask_quote_.price == book_.ask && z3_draw < cfg_.z3)
                fill_quote(false, ask_quote_.price, time, last_change, inv_integral);
            break;
        default:
            break;
    }
}

StepResult MarketMakingEnv::step(double off_a_raw, double off_b_raw) {
    if (done_) throw std::logic_error("env.step: episode already finished");
    if (!std::isfinite(off_a_raw) || !std::isfinite(off_b_raw))
        throw std::invalid_argument("env.step: offsets must be finite");

    const double t0 = t_;
    const double t_end = cfg_.dt * (step_idx_ + 1);
    const double w_start = wealth();
    double inv_integral = 0.0;
    double last_change = t0;
    const int trades_before = trades_;

    // (1) Cancel outstanding quotes. An active quote resting exactly at the
    // best cancels aggressively with probability z2.
    for (const bool bid_side : {true, false}) {
        Quote& q = bid_side ? bid_quote_ : ask_quote_;
        if (!q.exists) continue;
        const double best = bid_side ? book_.bid : book_.ask;
        if (q.active && q.price == best) {
            if (uniform01(agent_rng_) < cfg_.z2) {
                const EventType et =
                    bid_side ? EventType::cancel_buy_agg : EventType::cancel_sell_agg;
                const auto applied =
                    mark_and_apply(book_, et, t0, uniform01(agent_rng_), cfg_.marks,
                                   cfg_.cancel_trunc, cfg_.round_jumps, EventSource::agent);
                record_event(applied ? *applied
                                     : MarkedEvent{et, t0, 0.0, EventSource::agent});
                inject(static_cast<int>(et), t0);
            }
        }
        q = Quote{};
    }

    // (2) Quantize and interpret the action.
    const int off_a = quantize_offset(off_a_raw, cfg_.max_offset_ticks);
    const int off_b = quantize_offset(off_b_raw, cfg_.max_offset_ticks);
    const double quote_ask = book_.ask + off_a * cfg_.tick;
    const double quote_bid = book_.bid - off_b * cfg_.tick;
    bool post_bid = true;
    bool post_ask = true;
    if (quote_ask - quote_bid < 0.0) {
        post_bid = false;
        post_ask = false;
    }
    if (inventory_ >= cfg_.max_inventory) post_bid = false;
    if (inventory_ <= -cfg_.max_inventory) post_ask = false;

    // (3) Quotes crossing the opposite best execute as market orders.
    if (post_bid && quote_bid >= book_.ask) {
        execute_market_order(true, t0);
        post_bid = false;
    }
    if (post_ask && quote_ask <= book_.bid) {
        execute_market_order(false, t0);
        post_ask = false;
    }

    // (4) Post the remaining limit quotes against the current book.
    if (post_bid) {
        const double j = (quote_bid - book_.bid) / cfg_.tick;
        if (j > 0.0 && j < book_.spread_ticks()) {
            const MarkedEvent ev{EventType::limit_buy_agg, t0, j, EventSource::agent};
            apply_event(book_, ev);
            record_event(ev);
            inject(static_cast<int>(EventType::limit_buy_agg), t0);
            bid_quote_ = Quote{book_.bid, true, true};
        } else {
            bid_quote_ = Quote{quote_bid, true, true};
        }
    }
    if (post_ask) {
        const double j = (book_.ask - quote_ask) / cfg_.tick;
        if (j > 0.0 && j < book_.spread_ticks()) {
            const MarkedEvent ev{EventType::limit_sell_agg, t0, j, EventSource::agent};
            apply_event(book_, ev);
            record_event(ev);
            inject(static_cast<int>(EventType::limit_sell_agg), t0);
            ask_quote_ = Quote{book_.ask, true, true};
        } else {
            ask_quote_ = Quote{quote_ask, true, true};
        }
    }

    // (5) Market event stream over [t0, t_end).
    for (;;) {
        const auto ev = next_event(cfg_.hawkes, hawkes_, market_rng_, t_end);
        if (!ev) break;
        process_market_event(static_cast<EventType>(ev->dim_index), ev->time, last_change,
                             inv_integral);
    }

    // (6) Reward.
    inv_integral += std::abs(inventory_) * (t_end - last_change);
    const double penalty = cfg_.phi * inv_integral;
    const double reward = (wealth() - w_start) - penalty;

    t_ = t_end;
    ++step_idx_;
    done_ = step_idx_ >= cfg_.n_steps();
    return_sum_ += reward;
    inv_integral_ += inv_integral;
    abs_inv_sum_ += std::abs(inventory_);

    if (trace_) {
        StepTraceRow row;
        row.t = t_end;
        row.inventory = inventory_;
        row.cash = cash_;
        row.bid = book_.bid;
        row.ask = book_.ask;
        row.off_a = off_a;
        row.off_b = off_b;
        row.fills = trades_ - trades_before;
        row.reward = reward;
        step_log_.push_back(row);
    }

    StepResult result;
    result.obs = observe();
    result.reward = reward;
    result.done = done_;
    return result;
}

double MarketMakingEnv::map() const {
    return step_idx_ > 0 ? abs_inv_sum_ / static_cast<double>(step_idx_) : 0.0;
}

NormStats calibrate_normalization(const EnvConfig& cfg, std::uint64_t seed, int n_steps) {
    if (n_steps <= 0) throw std::invalid_argument("calibrate_normalization: n_steps must be > 0");
    Rng policy_rng(derive_seed(seed, seed_purpose::calibration));
    stats::RunningMoments spread_m;
    stats::RunningMoments trend_m;
    const double a_max = cfg.max_offset_ticks;
    int steps_done = 0;
    std::uint64_t episode = 0;
    const NormStats neutral{};
    while (steps_done < n_steps) {
        MarketMakingEnv env(cfg, neutral, derive_seed(seed, seed_purpose::calibration, 1 + episode));
        while (!env.done() && steps_done < n_steps) {
            const double off_a = uniform(policy_rng, -a_max, a_max);
            const double off_b = uniform(policy_rng, -a_max, a_max);
            const auto r = env.step(off_a, off_b);
            spread_m.add(r.obs.spread_ticks);
            trend_m.add(r.obs.trend);
            ++steps_done;
        }
        ++episode;
    }
    NormStats out;
    out.mean_spread = spread_m.mean();
    out.std_spread = spread_m.stddev();
    out.mean_trend = trend_m.mean();
    out.std_trend = trend_m.stddev();
    if (out.std_spread < 1e-12 || out.std_trend < 1e-12)
        throw std::runtime_error("calibrate_normalization: degenerate feature variance");
    return out;
}

EpisodeResult play_episode(MarketMakingEnv& env, const ActFn& act) {
    ObsView obs = env.reset();
    while (!env.done()) {
        const auto [off_a, off_b] = act(obs);
        obs = env.step(off_a, off_b).obs;
    }
    EpisodeResult r;
    r.pnl = env.wealth();
    r.episode_return = env.episode_return();
    r.terminal_inventory = env.inventory();
    r.map = env.map();
    r.n_trades = env.trades();
    r.inv_integral = env.inventory_integral();
    return r;
}

}  // namespace mmlab
