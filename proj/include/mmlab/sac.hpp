#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmlab/env.hpp"
#include "mmlab/net.hpp"
#include "mmlab/rng.hpp"

namespace mmlab {

struct SACConfig {
    double gamma = 1.0;
    int batch_size = 512;
    int buffer_capacity = 100000;
    double learning_rate = 3e-4;
    int learning_starts = 100;
    double target_entropy = -2.0;  // auto entropy mode, -dim(action)
    int target_update_interval = 1;
    int gradient_steps = 1;
    int train_freq = 1;
    double tau = 0.005;
    long total_steps = 1000000;
    int eval_interval = 10000;
    int eval_episodes = 20;
};

void validate_sac(const SACConfig& cfg);

struct Transition {
    std::array<double, 3> obs{};
    std::array<double, 2> action{};  // squashed action in (-1,1)^2
    double reward = 0.0;
    std::array<double, 3> next_obs{};
    bool done = false;
};

// Fixed-capacity FIFO ring with uniform without-replacement batch sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(int capacity);
    void push(const Transition& t);
    std::size_t size() const { return size_; }
    int capacity() const { return capacity_; }
    // Logical index: 0 is the oldest surviving transition.
    const Transition& at(std::size_t i) const;
    std::vector<std::size_t> sample_indices(Rng& rng, int batch) const;

private:
    std::vector<Transition> data_;
    int capacity_ = 0;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<std::vector<double>> m_w, v_w, m_b, v_b;

    static AdamState like(const Mlp& net);
    void step(Mlp& net, const MlpGrads& grads, double lr);
};

struct AdamScalar {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    double m = 0.0, v = 0.0;

    void step(double& param, double grad, double lr);
};

// theta_target <- tau * theta + (1 - tau) * theta_target.
void polyak_update(Mlp& target, const Mlp& main, double tau);

// Critic targets y = r + gamma * (1 - done) * (min(Q1', Q2')(s', a') -
// alpha * log pi(a'|s')), a' freshly sampled from the actor.
std::vector<double> compute_targets(const Mlp& actor, const Mlp& q1_target,
                                    const Mlp& q2_target,
                                    std::span<const Transition> batch, double alpha,
                                    double gamma, Rng& rng);

// Mean squared error of q(X) against y; accumulates exact analytic gradients
// into grads when non-null. X is batch x (obs+action).
double critic_mse(const Mlp& q, const std::vector<double>& inputs,
                  const std::vector<double>& targets, MlpGrads* grads);

// Actor loss mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a)) with a = tanh(mean
// + std * z) for the given fixed standard-normal draws z (batch x 2). Exact
// gradients for the actor parameters when grads is non-null; mean_log_prob
// receives the batch-mean log-probability when non-null.
double actor_loss(const Mlp& actor, const Mlp& q1, const Mlp& q2,
                  const std::vector<double>& states, const std::vector<double>& z,
                  double alpha, MlpGrads* grads, double* mean_log_prob);

// Entropy-coefficient loss mean(-log_alpha * (log_prob + target_entropy)) and
// its derivative with respect to log_alpha.
double alpha_loss(double log_alpha, double mean_log_prob, double target_entropy);
double alpha_loss_grad(double mean_log_prob, double target_entropy);

struct UpdateLosses {
    double q1 = 0.0;
    double q2 = 0.0;
    double actor = 0.0;
    double alpha_loss = 0.0;
    double alpha = 0.0;
};

struct CurveRow {
    long env_step = 0;
    double mean_eval_return = 0.0;
    double mean_eval_pnl = 0.0;
    double q1_loss = 0.0;
    double actor_loss = 0.0;
    double alpha = 0.0;
};

struct TrainResult {
    Mlp final_actor;
    Mlp best_actor;
    double best_eval_return = 0.0;
    std::vector<CurveRow> curve;
    long steps_done = 0;
};

// Deterministic evaluation: n_episodes with seeds seed_base..seed_base+n-1,
// tanh(mean) actions. Returns mean episode return; optional outputs receive
// mean PnL and mean trade count.
double evaluate_policy(const EnvConfig& env_cfg, const NormStats& norm, const Mlp& actor,
                       int n_episodes, std::uint64_t seed_base, double* mean_pnl = nullptr,
                       double* mean_trades = nullptr);

class SacTrainer {
public:
    SacTrainer(EnvConfig env_cfg, SACConfig cfg, NormStats norm, std::uint64_t master_seed);

    // One gradient update from the replay buffer. Preconditions (buffer size
    // and learning_starts) are the caller's responsibility; train() gates
    // them. Throws std::runtime_error on a non-finite loss.
    UpdateLosses update();

    TrainResult train();

    ReplayBuffer& buffer() { return buffer_; }
    const Mlp& actor() const { return actor_; }
    const Mlp& q1() const { return q1_; }
    const Mlp& q1_target() const { return q1_target_; }
    const Mlp& q2_target() const { return q2_target_; }
    double alpha() const;
    long env_steps() const { return env_steps_; }
    long updates() const { return update_count_; }

private:
    EnvConfig env_cfg_;
    SACConfig cfg_;
    NormStats norm_;
    std::uint64_t master_seed_;

    Mlp actor_, q1_, q2_, q1_target_, q2_target_;
    AdamState opt_actor_, opt_q1_, opt_q2_;
    AdamScalar opt_alpha_;
    double log_alpha_ = 0.0;

    ReplayBuffer buffer_;
    Rng policy_rng_;
    Rng batch_rng_;
    long env_steps_ = 0;
    long update_count_ = 0;
};

}  // namespace mmlab
