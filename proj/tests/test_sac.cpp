#include <doctest.h>

#include <cmath>
#include <vector>

#include "mmlab/sac.hpp"

using namespace mmlab;

namespace {

Transition make_transition(double marker, bool done = false, double reward = 0.0) {
    Transition t;
    t.obs = {marker, 0.0, 0.0};
    t.action = {0.1, -0.1};
    t.reward = reward;
    t.next_obs = {marker, 0.1, 0.0};
    t.done = done;
    return t;
}

EnvConfig tiny_market() {
    EnvConfig cfg;
    cfg.hawkes.dim = 8;
    cfg.hawkes.mu = {0.05, 0.05, 0.08, 0.08, 0.03, 0.03, 0.2, 0.2};
    cfg.hawkes.alpha.assign(64, 0.0);
    cfg.hawkes.beta.assign(64, 1.0);
    cfg.hawkes.alpha[0 * 8 + 0] = 0.1;
    cfg.hawkes.alpha[1 * 8 + 1] = 0.1;
    cfg.hawkes.beta[0 * 8 + 0] = 0.5;
    cfg.hawkes.beta[1 * 8 + 1] = 0.5;
    cfg.horizon = 20.0;
    cfg.init_spread_ticks = 20.0;
    cfg.max_offset_ticks = 40;
    cfg.marks = MarkParams{1.0, 4.0};
    cfg.p0 = 20.0;
    return cfg;
}

SACConfig tiny_sac() {
    SACConfig cfg;
    cfg.batch_size = 32;
    cfg.buffer_capacity = 2000;
    cfg.learning_starts = 40;
    cfg.total_steps = 300;
    cfg.eval_interval = 150;
    cfg.eval_episodes = 3;
    return cfg;
}

}  // namespace

TEST_CASE("replay buffer evicts FIFO at capacity") {
    ReplayBuffer buf(100);
    for (int i = 0; i < 101; ++i) buf.push(make_transition(i));
    CHECK(buf.size() == 100);
    CHECK(buf.at(0).obs[0] == 1.0);  // item 0 evicted
    CHECK(buf.at(99).obs[0] == 100.0);

    for (int i = 101; i < 101 + 7; ++i) buf.push(make_transition(i));
    CHECK(buf.size() == 100);
    CHECK(buf.at(0).obs[0] == 8.0);  // after capacity + k pushes, oldest is k+1
}

TEST_CASE("batch sampling is uniform without replacement") {
    ReplayBuffer buf(100);
    for (int i = 0; i < 100; ++i) buf.push(make_transition(i));
    Rng rng(99);

    // Without replacement within one batch.
    for (int rep = 0; rep < 50; ++rep) {
        const auto idx = buf.sample_indices(rng, 64);
        std::vector<bool> seen(100, false);
        for (const auto i : idx) {
            CHECK_FALSE(seen[i]);
            seen[i] = true;
        }
    }

    // A full-size batch is a permutation.
    const auto all = buf.sample_indices(rng, 100);
    std::vector<bool> seen(100, false);
    for (const auto i : all) seen[i] = true;
    for (const bool s : seen) CHECK(s);

    // Long-run frequencies stay within three standard deviations of uniform.
    std::vector<long> freq(100, 0);
    const int reps = 20000;
    for (int rep = 0; rep < reps; ++rep)
        for (const auto i : buf.sample_indices(rng, 10)) ++freq[i];
    const double expected = reps * 10.0 / 100.0;
    const double sigma = std::sqrt(reps * 0.1 * 0.9);
    for (const long f : freq) CHECK(std::fabs(f - expected) <= 3.0 * sigma);

    CHECK_THROWS_AS(buf.sample_indices(rng, 101), std::invalid_argument);
}

TEST_CASE("polyak update blends parameters with factor tau") {
    Rng rng(1);
    Mlp main = Mlp::make({2, 2, 1}, rng);
    Mlp target = Mlp::make({2, 2, 1}, rng);
    for (auto& l : main.layers) {
        std::fill(l.w.begin(), l.w.end(), 1.0);
        std::fill(l.b.begin(), l.b.end(), 1.0);
        l.sync_wt();
    }
    for (auto& l : target.layers) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
        l.sync_wt();
    }
    polyak_update(target, main, 0.005);
    for (const auto& l : target.layers)
        for (const double v : l.w) CHECK(v == doctest::Approx(0.005).epsilon(1e-12));

    // Geometric approach towards the (frozen) main parameters.
    for (int i = 0; i < 99; ++i) polyak_update(target, main, 0.005);
    const double expected = 1.0 - std::pow(0.995, 100);
    for (const auto& l : target.layers)
        for (const double v : l.w) CHECK(v == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("terminal transitions bootstrap to the raw reward when gamma = 1") {
    Rng rng(5);
    const Mlp actor = Mlp::make({3, 8, 8, 4}, rng);
    const Mlp q1 = Mlp::make({5, 8, 8, 1}, rng);
    const Mlp q2 = Mlp::make({5, 8, 8, 1}, rng);
    std::vector<Transition> batch;
    for (int i = 0; i < 16; ++i) batch.push_back(make_transition(i, true, 0.5 * i));
    Rng step_rng(7);
    const auto y = compute_targets(actor, q1, q2, batch, 0.2, 1.0, step_rng);
    for (int i = 0; i < 16; ++i) CHECK(y[i] == doctest::Approx(0.5 * i).epsilon(1e-12));

    // Non-terminal transitions do bootstrap.
    std::vector<Transition> live;
    for (int i = 0; i < 16; ++i) live.push_back(make_transition(i, false, 0.5 * i));
    Rng step_rng2(7);
    const auto y2 = compute_targets(actor, q1, q2, live, 0.2, 1.0, step_rng2);
    bool any_different = false;
    for (int i = 0; i < 16; ++i)
        if (std::fabs(y2[i] - 0.5 * i) > 1e-9) any_different = true;
    CHECK(any_different);
}

TEST_CASE("updates are deterministic and keep the entropy coefficient positive") {
    SacTrainer a(tiny_market(), tiny_sac(), NormStats{}, 42);
    SacTrainer b(tiny_market(), tiny_sac(), NormStats{}, 42);
    Rng fill(3);
    for (int i = 0; i < 64; ++i) {
        Transition t;
        t.obs = {uniform(fill, -1, 1), uniform(fill, -1, 1), uniform(fill, -1, 1)};
        t.action = {uniform(fill, -0.9, 0.9), uniform(fill, -0.9, 0.9)};
        t.reward = uniform(fill, -1, 1);
        t.next_obs = {uniform(fill, -1, 1), uniform(fill, -1, 1), uniform(fill, -1, 1)};
        t.done = (i % 20 == 19);
        a.buffer().push(t);
        b.buffer().push(t);
    }
    for (int i = 0; i < 10; ++i) {
        const auto la = a.update();
        const auto lb = b.update();
        CHECK(la.q1 == lb.q1);
        CHECK(la.actor == lb.actor);
        CHECK(la.alpha == lb.alpha);
        CHECK(la.alpha > 0.0);
    }
    CHECK(a.actor().layers[0].w == b.actor().layers[0].w);
    CHECK(a.q1_target().layers[0].w == b.q1_target().layers[0].w);
}

TEST_CASE("with zero rewards and terminal transitions the critics head to zero") {
    auto sac = tiny_sac();
    SacTrainer trainer(tiny_market(), sac, NormStats{}, 7);
    Rng fill(11);
    for (int i = 0; i < 128; ++i) {
        Transition t;
        t.obs = {uniform(fill, -1, 1), uniform(fill, -1, 1), uniform(fill, -1, 1)};
        t.action = {uniform(fill, -0.9, 0.9), uniform(fill, -0.9, 0.9)};
        t.reward = 0.0;
        t.next_obs = t.obs;
        t.done = true;
        trainer.buffer().push(t);
    }
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 300; ++i) {
        const auto l = trainer.update();
        if (i == 0) first = l.q1;
        last = l.q1;
        CHECK(std::isfinite(l.q1));
    }
    CHECK(last < first);
    CHECK(last < 0.01);
}

TEST_CASE("a poisoned batch aborts the update with a diagnostic error") {
    SacTrainer trainer(tiny_market(), tiny_sac(), NormStats{}, 13);
    for (int i = 0; i < 40; ++i)
        trainer.buffer().push(make_transition(i, false, std::nan("")));
    CHECK_THROWS_AS(trainer.update(), std::runtime_error);
}

TEST_CASE("zero training steps return the initial parameters") {
    auto sac = tiny_sac();
    sac.total_steps = 0;
    SacTrainer trainer(tiny_market(), sac, NormStats{}, 21);
    const auto before = trainer.actor().layers[0].w;
    const auto result = trainer.train();
    CHECK(result.steps_done == 0);
    CHECK(result.curve.empty());
    CHECK(result.final_actor.layers[0].w == before);
    CHECK(result.best_actor.layers[0].w == before);
}

TEST_CASE("training runs are reproducible from the master seed") {
    auto run = [] {
        SacTrainer trainer(tiny_market(), tiny_sac(), NormStats{}, 2718);
        return trainer.train();
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.curve.size() == b.curve.size());
    CHECK(!a.curve.empty());
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
        CHECK(a.curve[i].mean_eval_return == b.curve[i].mean_eval_return);
        CHECK(a.curve[i].q1_loss == b.curve[i].q1_loss);
        CHECK(a.curve[i].alpha == b.curve[i].alpha);
    }
    for (std::size_t li = 0; li < a.final_actor.layers.size(); ++li)
        CHECK(a.final_actor.layers[li].w == b.final_actor.layers[li].w);
}

TEST_CASE("configuration gates are validated") {
    auto cfg = tiny_sac();
    cfg.tau = 0.0;
    CHECK_THROWS_AS(validate_sac(cfg), std::invalid_argument);
    cfg = tiny_sac();
    cfg.buffer_capacity = cfg.batch_size - 1;
    CHECK_THROWS_AS(validate_sac(cfg), std::invalid_argument);
    cfg = tiny_sac();
    cfg.gamma = 1.5;
    CHECK_THROWS_AS(validate_sac(cfg), std::invalid_argument);
}
