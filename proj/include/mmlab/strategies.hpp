#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mmlab/env.hpp"

namespace mmlab {

// Common controller interface: a pure mapping from an observation to a pair
// of (ask, bid) offsets in ticks. Controllers hold no per-step state, so a
// recorded episode replays to identical actions.
class Controller {
public:
    virtual ~Controller() = default;
    virtual std::pair<double, double> act(const ObsView& obs) const = 0;
    virtual bool deterministic() const { return true; }
    virtual std::string name() const = 0;

    ActFn as_fn() const {
        return [this](const ObsView& o) { return act(o); };
    }
};

// SYM: always quote at the best bid and best ask.
class SymController : public Controller {
public:
    std::pair<double, double> act(const ObsView&) const override { return {0.0, 0.0}; }
    std::string name() const override { return "sym"; }
};

struct LinParams {
    double theta0 = 0.0;  // base offset, ticks
    double theta1 = 0.0;  // inventory skew, ticks per unit
};

// Linear-in-inventory quoting: off_b = round(theta0 + theta1*I),
// off_a = round(theta0 - theta1*I). Long inventory deepens the bid and
// tightens (possibly crosses) the ask.
class LinController : public Controller {
public:
    explicit LinController(LinParams p) : p_(p) {}
    std::pair<double, double> act(const ObsView& obs) const override;
    std::string name() const override { return "lin"; }
    const LinParams& params() const { return p_; }

private:
    LinParams p_;
};

struct GridSearchRow {
    LinParams params{};
    double mean_return = 0.0;
    double mean_pnl = 0.0;
    double std_pnl = 0.0;
    double sharpe = 0.0;
    double map = 0.0;
};

struct GridSearchResult {
    LinParams best{};
    double best_metric = 0.0;
    std::vector<GridSearchRow> report;  // in grid order
};

// Evaluates every candidate on the same seed set (common random numbers) and
// returns the argmax of the metric (mean episode return), ties broken by
// smaller theta0 then smaller theta1.
GridSearchResult grid_search_lin(const EnvConfig& cfg, const NormStats& norm,
                                 const std::vector<LinParams>& grid, int n_episodes,
                                 std::uint64_t seed_base);

}  // namespace mmlab
