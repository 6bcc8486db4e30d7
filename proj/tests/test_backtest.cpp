#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mmlab/backtest.hpp"
#include "mmlab/stats.hpp"

using namespace mmlab;

namespace {

EnvConfig mc_market() {
    EnvConfig cfg;
    cfg.hawkes.dim = 8;
    cfg.hawkes.mu = {0.05, 0.05, 0.08, 0.08, 0.03, 0.03, 0.2, 0.2};
    cfg.hawkes.alpha.assign(64, 0.0);
    cfg.hawkes.beta.assign(64, 1.0);
    cfg.hawkes.alpha[0 * 8 + 0] = 0.12;
    cfg.hawkes.alpha[1 * 8 + 1] = 0.12;
    cfg.hawkes.beta[0 * 8 + 0] = 0.5;
    cfg.hawkes.beta[1 * 8 + 1] = 0.5;
    cfg.init_spread_ticks = 20.0;
    cfg.max_offset_ticks = 40;
    cfg.marks = MarkParams{1.0, 4.0};
    cfg.p0 = 20.0;
    cfg.horizon = 50.0;
    return cfg;
}

std::vector<EpisodeRecord> synthetic_records(const std::vector<double>& pnls) {
    std::vector<EpisodeRecord> records;
    for (std::size_t i = 0; i < pnls.size(); ++i) {
        EpisodeRecord r;
        r.seed = i;
        r.pnl = pnls[i];
        r.episode_return = pnls[i] - 0.5;
        r.terminal_inventory = static_cast<int>(i % 5) - 2;
        r.map = 0.8;
        r.n_trades = static_cast<int>(10 + i % 7);
        records.push_back(r);
    }
    return records;
}

}  // namespace

TEST_CASE("reported ratios reproduce the published self-contained values") {
    // Sharpe from a (mean, std) pair and the PnL-to-MAP ratio, at the
    // tolerance of their rounded inputs.
    CHECK(std::fabs(13.7567 / 8.4952 - 1.6193) < 1e-4);
    CHECK(std::fabs(9.8686 / 1.4659 - 6.7321) < 1e-4);

    // The same numbers flow through summarize()'s formulas.
    std::vector<EpisodeRecord> records;
    for (int i = 0; i < 2; ++i) {
        EpisodeRecord r;
        r.seed = i;
        r.pnl = 13.7567 + (i == 0 ? -8.4952 : 8.4952) / std::sqrt(2.0);
        r.episode_return = r.pnl;
        r.map = 1.4659;
        records.push_back(r);
    }
    const auto s = summarize(records);
    CHECK(s.pnl.mean == doctest::Approx(13.7567).epsilon(1e-9));
    CHECK(s.pnl.stddev == doctest::Approx(8.4952).epsilon(1e-9));
    CHECK(s.sharpe == doctest::Approx(13.7567 / 8.4952).epsilon(1e-12));
    CHECK(s.pnl_over_map == doctest::Approx(s.pnl.mean / s.map).epsilon(1e-12));
}

TEST_CASE("jarque-bera: exact zeros, the moment formula, and the null distribution") {
    // Six-point sample with exactly zero skewness and zero excess kurtosis:
    // {-a, 0, 0, 0, 0, a} has m4/m2^2 = 3 for any a.
    const auto [jb, p] = stats::jarque_bera({-2.5, 0.0, 0.0, 0.0, 0.0, 2.5});
    CHECK(jb < 1e-12);
    CHECK(p > 1.0 - 1e-12);

    CHECK(stats::jarque_bera_statistic(1000, 1.0, 0.0) == doctest::Approx(166.67).epsilon(1e-4));

    // Under the null, large-sample JB stays below the 1% critical value in
    // at least 98% of replications.
    Rng rng(123456);
    int ok = 0;
    const int reps = 200;
    for (int rep = 0; rep < reps; ++rep) {
        std::vector<double> xs(100000);
        for (auto& x : xs) x = normal(rng);
        const auto [stat, pval] = stats::jarque_bera(xs);
        if (pval > 0.01) ++ok;
        CHECK(std::fabs(stat) < 1e3);
    }
    CHECK(ok >= 196);
}

TEST_CASE("percentiles interpolate linearly (ramp convention)") {
    std::vector<double> ramp;
    for (int i = 0; i <= 10; ++i) ramp.push_back(i);
    CHECK(stats::percentile(ramp, 10.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stats::percentile(ramp, 90.0) == doctest::Approx(9.0).epsilon(1e-12));
    CHECK(stats::percentile(ramp, 0.0) == 0.0);
    CHECK(stats::percentile(ramp, 100.0) == 10.0);
}

TEST_CASE("summarize is permutation-invariant and self-consistent") {
    Rng rng(4242);
    std::vector<double> pnls(500);
    for (auto& p : pnls) p = 3.0 + 2.0 * normal(rng);
    auto records = synthetic_records(pnls);
    const auto s1 = summarize(records);

    std::mt19937_64 shuffler(7);
    std::shuffle(records.begin(), records.end(), shuffler);
    const auto s2 = summarize(records);
    CHECK(s1.pnl.mean == doctest::Approx(s2.pnl.mean).epsilon(1e-12));
    CHECK(s1.pnl.stddev == doctest::Approx(s2.pnl.stddev).epsilon(1e-12));
    CHECK(s1.pnl.p10 == s2.pnl.p10);
    CHECK(s1.inventory.jarque_bera == doctest::Approx(s2.inventory.jarque_bera).epsilon(1e-12));

    // Ratio metrics recompute from their components.
    CHECK(s1.sharpe == doctest::Approx(s1.pnl.mean / s1.pnl.stddev).epsilon(1e-12));
    CHECK(s1.pnl_over_map == doctest::Approx(s1.pnl.mean / s1.map).epsilon(1e-12));
    CHECK(s1.pnl.jarque_bera_p == doctest::Approx(std::exp(-s1.pnl.jarque_bera / 2.0)).epsilon(1e-12));

    CHECK_THROWS_AS(summarize({records.front()}), std::invalid_argument);
}

TEST_CASE("episode records enforce the return identity on write") {
    EpisodeResult good;
    good.pnl = 2.5;
    good.inv_integral = 30.0;
    good.episode_return = 2.5 - 0.01 * 30.0;
    CHECK_NOTHROW(EpisodeRecord::from_episode(1, good, 0.01));

    auto bad = good;
    bad.episode_return += 0.001;
    CHECK_THROWS_AS(EpisodeRecord::from_episode(1, bad, 0.01), std::logic_error);
}

TEST_CASE("monte carlo runs are empty at n=0 and reproducible") {
    const auto cfg = mc_market();
    const SymController sym;
    CHECK(run_monte_carlo(cfg, NormStats{}, sym, 0, 1).empty());

    const auto a = run_monte_carlo(cfg, NormStats{}, sym, 30, 10'000);
    const auto b = run_monte_carlo(cfg, NormStats{}, sym, 30, 10'000);
    REQUIRE(a.size() == 30);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].seed == 10'000 + i);
        CHECK(a[i].pnl == b[i].pnl);
        CHECK(a[i].episode_return == b[i].episode_return);
        CHECK(a[i].n_trades == b[i].n_trades);
    }
}

TEST_CASE("noise sweep: variance zero reproduces the base run; noise perturbs it") {
    const auto cfg = mc_market();
    const SymController sym;
    const auto base = summarize(run_monte_carlo(cfg, NormStats{}, sym, 40, 77));
    const auto entries = sweep_noise(cfg, NormStats{}, sym, {0.0, 0.3}, 40, 77);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].summary.pnl.mean == base.pnl.mean);
    CHECK(entries[0].summary.pnl.stddev == base.pnl.stddev);
    CHECK(entries[0].summary.mean_trades == base.mean_trades);
    CHECK(entries[1].summary.mean_trades != base.mean_trades);

    // Same sweep twice: identical (noise draws are seeded per episode).
    const auto again = sweep_noise(cfg, NormStats{}, sym, {0.0, 0.3}, 40, 77);
    CHECK(again[1].summary.pnl.mean == entries[1].summary.pnl.mean);
}

TEST_CASE("noise perturbations clamp baselines at zero") {
    // With near-zero baselines and a large variance, roughly half of the draws
    // go negative; without the clamp the perturbed config would fail its own
    // mu >= 0 validation inside the episode loop.
    auto cfg = mc_market();
    for (auto& mu : cfg.hawkes.mu) mu = 1e-4;
    const SymController sym;
    const auto entries = sweep_noise(cfg, NormStats{}, sym, {4.0}, 30, 123);
    CHECK(entries.size() == 1);
    CHECK(std::isfinite(entries[0].summary.pnl.mean));
}

TEST_CASE("an episode pinned at |I| = 1 has MAP exactly one") {
    // Dead market: a single crossing buy at the first step, then hold.
    EnvConfig cfg;
    cfg.hawkes.dim = 8;
    cfg.hawkes.mu.assign(8, 0.0);
    cfg.hawkes.alpha.assign(64, 0.0);
    cfg.hawkes.beta.assign(64, 1.0);
    cfg.z1 = 0.0;
    cfg.z2 = 0.0;
    cfg.init_spread_ticks = 20.0;
    cfg.max_offset_ticks = 40;
    MarketMakingEnv env(cfg, NormStats{}, 3);
    bool first = true;
    while (!env.done()) {
        env.step(6.0, first ? -25.0 : 40.0);
        first = false;
    }
    CHECK(env.inventory() == 1);
    CHECK(env.map() == doctest::Approx(1.0).epsilon(1e-12));
}

namespace {
class CountingRetrain {
public:
    int calls = 0;
    std::unique_ptr<Controller> operator()(const EnvConfig&) {
        ++calls;
        return std::make_unique<SymController>();
    }
};
}  // namespace

TEST_CASE("fee sweep evaluates every controller per fee and invokes the retrain hook") {
    const auto cfg = mc_market();
    const SymController sym;
    const LinController lin(LinParams{3.0, 2.0});
    auto counter = std::make_shared<CountingRetrain>();
    const auto entries =
        sweep_fees(cfg, NormStats{}, {&sym, &lin}, {0.0, 0.002}, 25, 500,
                   [counter](const EnvConfig& c) { return (*counter)(c); });
    CHECK(counter->calls == 2);
    REQUIRE(entries.size() == 6);  // (sym, lin, retrained) x 2 fees
    CHECK(entries[0].controller == "sym");
    CHECK(entries[1].controller == "lin");
    CHECK(entries[2].controller == "sym-retrained");
    CHECK(entries[0].maker_fee == 0.0);
    CHECK(entries[3].maker_fee == 0.002);

    // Fee 0 reproduces the plain backtest.
    const auto base = summarize(run_monte_carlo(cfg, NormStats{}, sym, 25, 500));
    CHECK(entries[0].summary.pnl.mean == base.pnl.mean);

    // Lower fees never reduce PnL for the same strategy on the same seeds.
    CHECK(entries[0].summary.pnl.mean >= entries[3].summary.pnl.mean);
}
