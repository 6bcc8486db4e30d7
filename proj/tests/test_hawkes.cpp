#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mmlab/hawkes.hpp"
#include "mmlab/stats.hpp"
#include "oracles.hpp"

using namespace mmlab;

namespace {

HawkesParams one_dim(double mu, double alpha, double beta) {
    HawkesParams p;
    p.dim = 1;
    p.mu = {mu};
    p.alpha = {alpha};
    p.beta = {beta};
    return p;
}

HawkesParams two_dim_branching() {
    // Branching matrix [[0.3, 0.2], [0.1, 0.4]] with unit decays.
    HawkesParams p;
    p.dim = 2;
    p.mu = {0.5, 0.3};
    p.alpha = {0.3, 0.2, 0.1, 0.4};
    p.beta = {1.0, 1.0, 1.0, 1.0};
    return p;
}

HawkesParams eight_dim_mixed() {
    HawkesParams p;
    p.dim = 8;
    p.mu.assign(8, 0.5);
    p.alpha.assign(64, 0.0);
    p.beta.assign(64, 1.0);
    for (int k = 0; k < 8; ++k) {
        p.alpha[k * 8 + k] = 0.2;
        p.beta[k * 8 + k] = 1.0;
        p.alpha[k * 8 + (k + 1) % 8] = 0.13;
        p.beta[k * 8 + (k + 1) % 8] = 1.3;
        p.alpha[k * 8 + (k + 3) % 8] = 0.035;
        p.beta[k * 8 + (k + 3) % 8] = 0.7;
    }
    return p;
}

}  // namespace

TEST_CASE("intensity of a fresh state equals the baselines") {
    const auto p = eight_dim_mixed();
    auto s = make_hawkes_state(p);
    const auto lam = intensity(p, s);
    for (int k = 0; k < 8; ++k) CHECK(lam[k] == p.mu[k]);
    advance(p, s, 17.3);
    const auto lam2 = intensity(p, s);
    for (int k = 0; k < 8; ++k) CHECK(lam2[k] == p.mu[k]);
}

TEST_CASE("single-event intensity matches the closed form") {
    const auto p = one_dim(0.2, 0.5, 1.0);
    auto s = make_hawkes_state(p);
    inject_event(p, s, 0, 0.0);
    advance(p, s, std::log(2.0));
    const auto lam = intensity(p, s);
    CHECK(lam[0] == doctest::Approx(0.45).epsilon(1e-12));
}

TEST_CASE("injection jumps intensities by the alpha column") {
    const auto p = eight_dim_mixed();
    auto s = make_hawkes_state(p);
    advance(p, s, 2.0);
    const auto before = intensity(p, s);
    inject_event(p, s, 3, s.t);
    const auto after = intensity(p, s);
    for (int k = 0; k < 8; ++k)
        CHECK(after[k] - before[k] == doctest::Approx(p.a(k, 3)).epsilon(1e-12));
    CHECK(s.event_counts[3] == 1);
}

TEST_CASE("injecting into a zero alpha column leaves intensities unchanged") {
    auto p = two_dim_branching();
    p.alpha[0 * 2 + 1] = 0.0;
    p.alpha[1 * 2 + 1] = 0.0;
    auto s = make_hawkes_state(p);
    inject_event(p, s, 1, 0.5);
    const auto lam = intensity(p, s);
    CHECK(lam[0] == p.mu[0]);
    CHECK(lam[1] == p.mu[1]);
}

TEST_CASE("simultaneous injections add linearly") {
    const auto p = two_dim_branching();
    auto s = make_hawkes_state(p);
    inject_event(p, s, 0, 1.0);
    inject_event(p, s, 1, 1.0);
    const auto lam = intensity(p, s);
    CHECK(lam[0] == doctest::Approx(p.mu[0] + p.a(0, 0) + p.a(0, 1)).epsilon(1e-12));
    CHECK(lam[1] == doctest::Approx(p.mu[1] + p.a(1, 0) + p.a(1, 1)).epsilon(1e-12));
}

TEST_CASE("out-of-order injection is rejected") {
    const auto p = one_dim(0.1, 0.1, 1.0);
    auto s = make_hawkes_state(p);
    advance(p, s, 1.0);
    CHECK_THROWS_AS(inject_event(p, s, 0, 0.5), std::invalid_argument);
}

TEST_CASE("advance: identity at dt=0, semigroup property, decay limit") {
    const auto p = eight_dim_mixed();
    auto s = make_hawkes_state(p);
    Rng rng(7);
    for (int i = 0; i < 5; ++i)
        inject_event(p, s, static_cast<int>(rng() % 8), s.t + uniform01(rng));

    auto s0 = s;
    advance(p, s0, 0.0);
    CHECK(s0.excitation == s.excitation);

    auto half = s;
    advance(p, half, 0.35);
    advance(p, half, 0.35);
    auto full = s;
    advance(p, full, 0.7);
    for (std::size_t i = 0; i < full.excitation.size(); ++i) {
        if (full.excitation[i] == 0.0)
            CHECK(half.excitation[i] == 0.0);
        else
            CHECK(half.excitation[i] ==
                  doctest::Approx(full.excitation[i]).epsilon(1e-12));
    }

    auto late = s;
    advance(p, late, 1e3);
    const auto lam = intensity(p, late);
    for (int k = 0; k < 8; ++k) CHECK(lam[k] == doctest::Approx(p.mu[k]).epsilon(1e-12));

    CHECK_THROWS_AS(advance(p, s, -1.0), std::invalid_argument);
}

TEST_CASE("thinning reproduces a pure Poisson rate within 2 percent") {
    const auto p = one_dim(2.0, 0.0, 1.0);
    const double horizon = 10000.0;
    for (const std::uint64_t seed : {11u, 22u, 33u}) {
        Rng rng(seed);
        auto s = make_hawkes_state(p);
        long count = 0;
        while (next_event(p, s, rng, horizon)) ++count;
        const double rate = static_cast<double>(count) / horizon;
        CHECK(rate == doctest::Approx(2.0).epsilon(0.02));
    }
}

TEST_CASE("zero baseline with empty history yields no events") {
    const auto p = one_dim(0.0, 0.5, 1.0);
    auto s = make_hawkes_state(p);
    Rng rng(5);
    CHECK_FALSE(next_event(p, s, rng, 100.0).has_value());
    CHECK(s.t == 100.0);
}

TEST_CASE("two-dim empirical rates match the stationary solution within 3 percent") {
    const auto p = two_dim_branching();
    const auto expected = stationary_rates(p);
    const double horizon = 50000.0;
    Rng rng(42);
    auto s = make_hawkes_state(p);
    while (next_event(p, s, rng, horizon)) {
    }
    for (int k = 0; k < 2; ++k) {
        const double rate = static_cast<double>(s.event_counts[k]) / horizon;
        CHECK(rate == doctest::Approx(expected[k]).epsilon(0.03));
    }
}

TEST_CASE("branching spectral radius: zero, diagonal, explosive") {
    auto p = two_dim_branching();
    p.alpha.assign(4, 0.0);
    CHECK(branching_spectral_radius(p) == 0.0);

    HawkesParams d;
    d.dim = 2;
    d.mu = {0.1, 0.1};
    d.alpha = {0.5, 0.0, 0.0, 0.5};
    d.beta = {1.0, 1.0, 1.0, 1.0};
    CHECK(branching_spectral_radius(d) == doctest::Approx(0.5).epsilon(1e-9));

    const auto exploding = one_dim(0.1, 1.2, 1.0);
    CHECK(branching_spectral_radius(exploding) == doctest::Approx(1.2).epsilon(1e-9));
    CHECK_THROWS_AS(validate_hawkes(exploding), std::invalid_argument);
}

TEST_CASE("intensities never drop below the baselines along a stream") {
    const auto p = eight_dim_mixed();
    auto s = make_hawkes_state(p);
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        const auto ev = next_event(p, s, rng, s.t + 10.0);
        if (!ev) continue;
        const auto lam = intensity(p, s);
        for (int k = 0; k < 8; ++k) CHECK(lam[k] >= p.mu[k]);
    }
}

TEST_CASE("Markov recursion equals the brute-force history sum to 1e-9 relative") {
    const auto p = eight_dim_mixed();
    auto s = make_hawkes_state(p);
    Rng rng(9);
    std::vector<RawEvent> history;
    double probe_accumulator = 0.0;
    while (history.size() < 1000) {
        const auto ev = next_event(p, s, rng, s.t + 5.0);
        if (!ev) continue;
        history.push_back(*ev);
        const auto lam = intensity(p, s);
        const auto ref = oracles::intensity_from_history(p, history, s.t);
        for (int k = 0; k < 8; ++k)
            CHECK(lam[k] == doctest::Approx(ref[k]).epsilon(1e-9));
        probe_accumulator += lam[0];
    }
    CHECK(probe_accumulator > 0.0);

    // Also probe between events.
    advance(p, s, 0.37);
    const auto lam = intensity(p, s);
    const auto ref = oracles::intensity_from_history(p, history, s.t);
    for (int k = 0; k < 8; ++k) CHECK(lam[k] == doctest::Approx(ref[k]).epsilon(1e-9));
}

TEST_CASE("time-rescaled inter-arrivals pass a KS test against Exp(1)") {
    const auto p = two_dim_branching();
    auto s = make_hawkes_state(p);
    Rng rng(17);
    std::vector<std::vector<double>> increments(2);
    std::vector<double> last_comp(2, 0.0);
    while (increments[0].size() < 3000 || increments[1].size() < 3000) {
        const auto ev = next_event(p, s, rng, s.t + 20.0);
        if (!ev) continue;
        const int k = ev->dim_index;
        increments[k].push_back(s.compensator[k] - last_comp[k]);
        last_comp[k] = s.compensator[k];
    }
    for (int k = 0; k < 2; ++k) {
        const double d = stats::ks_statistic_exp1(increments[k]);
        CHECK(d < stats::ks_critical_value(increments[k].size(), 0.01));
    }
}

TEST_CASE("thinning matches a fine-grid Bernoulli simulator (chi-square)") {
    const double mu = 1.2, alpha = 0.6, beta = 1.3, horizon = 3.0;
    const auto p = one_dim(mu, alpha, beta);
    const int reps = 20000;

    std::vector<long> thin_counts, grid_counts;
    {
        Rng rng(1001);
        for (int r = 0; r < reps; ++r) {
            auto s = make_hawkes_state(p);
            long c = 0;
            while (next_event(p, s, rng, horizon)) ++c;
            thin_counts.push_back(c);
        }
    }
    {
        Rng rng(2002);
        for (int r = 0; r < reps; ++r)
            grid_counts.push_back(oracles::bernoulli_grid_count(mu, alpha, beta, horizon, 1e-4, rng));
    }

    const long max_count =
        std::max(*std::max_element(thin_counts.begin(), thin_counts.end()),
                 *std::max_element(grid_counts.begin(), grid_counts.end()));
    std::vector<long> ha(static_cast<std::size_t>(max_count) + 1, 0);
    std::vector<long> hb(static_cast<std::size_t>(max_count) + 1, 0);
    for (const long c : thin_counts) ++ha[static_cast<std::size_t>(c)];
    for (const long c : grid_counts) ++hb[static_cast<std::size_t>(c)];

    // Pool bins so each pooled cell holds at least 10 observations combined.
    double chi2 = 0.0;
    int cells = 0;
    long pa = 0, pb = 0;
    for (std::size_t i = 0; i < ha.size(); ++i) {
        pa += ha[i];
        pb += hb[i];
        if (pa + pb >= 10) {
            const double diff = static_cast<double>(pa - pb);
            chi2 += diff * diff / static_cast<double>(pa + pb);
            ++cells;
            pa = pb = 0;
        }
    }
    if (pa + pb > 0) {
        const double diff = static_cast<double>(pa - pb);
        chi2 += diff * diff / static_cast<double>(pa + pb);
        ++cells;
    }
    REQUIRE(cells >= 3);
    const double pval = stats::chi_square_sf(chi2, cells - 1);
    CHECK(pval > 0.01);
}

TEST_CASE("identical seeds produce identical event streams") {
    const auto p = eight_dim_mixed();
    auto run = [&] {
        Rng rng(77);
        auto s = make_hawkes_state(p);
        std::vector<RawEvent> events;
        while (events.size() < 500) {
            const auto ev = next_event(p, s, rng, s.t + 5.0);
            if (ev) events.push_back(*ev);
        }
        return events;
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].time == b[i].time);
        CHECK(a[i].dim_index == b[i].dim_index);
    }
}

TEST_CASE("validation rejects malformed parameters") {
    auto p = one_dim(-0.1, 0.0, 1.0);
    CHECK_THROWS_WITH_AS(validate_hawkes(p), "hawkes.mu[0]: must be >= 0",
                         std::invalid_argument);
    p = one_dim(0.1, 0.5, 0.0);
    CHECK_THROWS_AS(validate_hawkes(p), std::invalid_argument);
    p = one_dim(0.1, -0.2, 1.0);
    CHECK_THROWS_AS(validate_hawkes(p), std::invalid_argument);
}
