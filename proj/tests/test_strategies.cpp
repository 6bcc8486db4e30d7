#include <doctest.h>

#include "mmlab/strategies.hpp"

using namespace mmlab;

namespace {

EnvConfig grid_market() {
    EnvConfig cfg;
    cfg.hawkes.dim = 8;
    cfg.hawkes.mu = {0.05, 0.05, 0.08, 0.08, 0.03, 0.03, 0.2, 0.2};
    cfg.hawkes.alpha.assign(64, 0.0);
    cfg.hawkes.beta.assign(64, 1.0);
    cfg.hawkes.alpha[0 * 8 + 0] = 0.1;
    cfg.hawkes.alpha[1 * 8 + 1] = 0.1;
    cfg.hawkes.beta[0 * 8 + 0] = 0.5;
    cfg.hawkes.beta[1 * 8 + 1] = 0.5;
    cfg.init_spread_ticks = 20.0;
    cfg.max_offset_ticks = 40;
    cfg.marks = MarkParams{1.0, 4.0};
    cfg.p0 = 20.0;
    return cfg;
}

ObsView obs_with_inventory(int inv) {
    ObsView o;
    o.inventory = inv;
    return o;
}

}  // namespace

TEST_CASE("SYM always quotes at the touch") {
    const SymController sym;
    for (int inv = -3; inv <= 3; ++inv) {
        const auto [a, b] = sym.act(obs_with_inventory(inv));
        CHECK(a == 0.0);
        CHECK(b == 0.0);
    }
    CHECK(sym.deterministic());
}

TEST_CASE("LIN skews linearly in inventory with round-half-away quantization") {
    SUBCASE("zero skew degenerates to constant symmetric offsets") {
        const LinController lin(LinParams{2.0, 0.0});
        for (int inv = -3; inv <= 3; ++inv) {
            const auto [a, b] = lin.act(obs_with_inventory(inv));
            CHECK(a == 2.0);
            CHECK(b == 2.0);
        }
    }
    SUBCASE("worked example: theta0 = 1, theta1 = 1, I = 2") {
        const LinController lin(LinParams{1.0, 1.0});
        const auto [a, b] = lin.act(obs_with_inventory(2));
        CHECK(b == 3.0);
        CHECK(a == -1.0);  // the ask improves inside the spread
    }
    SUBCASE("zero inventory is symmetric") {
        const LinController lin(LinParams{1.5, 2.0});
        const auto [a, b] = lin.act(obs_with_inventory(0));
        CHECK(a == b);
        CHECK(a == 2.0);  // 1.5 rounds away from zero
    }
    SUBCASE("odd symmetry around the base offset") {
        const LinController lin(LinParams{2.0, 1.0});
        for (int inv = -3; inv <= 3; ++inv) {
            const auto [a, b] = lin.act(obs_with_inventory(inv));
            CHECK(b - 2.0 == -(a - 2.0));
        }
    }
}

TEST_CASE("grid search: singleton grid, determinism, dominated member") {
    const auto cfg = grid_market();
    const NormStats norm{};

    SUBCASE("singleton grid returns its only member") {
        const std::vector<LinParams> grid = {{3.0, 2.0}};
        const auto r = grid_search_lin(cfg, norm, grid, 10, 900);
        CHECK(r.best.theta0 == 3.0);
        CHECK(r.best.theta1 == 2.0);
        CHECK(r.report.size() == 1);
    }

    SUBCASE("empty grid and non-positive episode counts are rejected") {
        CHECK_THROWS_AS(grid_search_lin(cfg, norm, {}, 10, 900), std::invalid_argument);
        CHECK_THROWS_AS(grid_search_lin(cfg, norm, {{1.0, 1.0}}, 0, 900),
                        std::invalid_argument);
    }

    SUBCASE("a deep extreme is dominated under a heavy inventory penalty") {
        auto heavy = cfg;
        heavy.phi = 0.05;
        const std::vector<LinParams> grid = {{0.0, 0.0}, {3.0, 2.0}, {40.0, 40.0}};
        const auto r = grid_search_lin(heavy, norm, grid, 60, 900);
        CHECK_FALSE((r.best.theta0 == 40.0 && r.best.theta1 == 40.0));
    }

    SUBCASE("same seeds select the same candidate, in any grid order") {
        const std::vector<LinParams> grid = {{0.0, 0.0}, {3.0, 2.0}, {6.0, 4.0}};
        const auto a = grid_search_lin(cfg, norm, grid, 40, 900);
        const auto b = grid_search_lin(cfg, norm, grid, 40, 900);
        CHECK(a.best.theta0 == b.best.theta0);
        CHECK(a.best.theta1 == b.best.theta1);
        CHECK(a.best_metric == b.best_metric);

        const std::vector<LinParams> reversed = {{6.0, 4.0}, {3.0, 2.0}, {0.0, 0.0}};
        const auto c = grid_search_lin(cfg, norm, reversed, 40, 900);
        CHECK(a.best.theta0 == c.best.theta0);
        CHECK(a.best.theta1 == c.best.theta1);
    }
}

TEST_CASE("controllers are pure: replaying observations reproduces actions") {
    const LinController lin(LinParams{2.0, 1.0});
    const auto first = lin.act(obs_with_inventory(2));
    for (int i = 0; i < 5; ++i) {
        const auto again = lin.act(obs_with_inventory(2));
        CHECK(again == first);
    }
}

TEST_CASE("SYM carries visibly more terminal-inventory dispersion than a skewed LIN") {
    const auto cfg = grid_market();
    const NormStats norm{};
    const SymController sym;
    const LinController lin(LinParams{6.0, 8.0});
    double sym_sq = 0.0, lin_sq = 0.0;
    const int n = 120;
    for (int i = 0; i < n; ++i) {
        MarketMakingEnv env_a(cfg, norm, 4000 + static_cast<std::uint64_t>(i));
        const auto ra = play_episode(env_a, sym.as_fn());
        sym_sq += static_cast<double>(ra.terminal_inventory) * ra.terminal_inventory;
        MarketMakingEnv env_b(cfg, norm, 4000 + static_cast<std::uint64_t>(i));
        const auto rb = play_episode(env_b, lin.as_fn());
        lin_sq += static_cast<double>(rb.terminal_inventory) * rb.terminal_inventory;
    }
    CHECK(sym_sq / n > 2.0 * (lin_sq / n));
}
