#include "mmlab/sac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "mmlab/parallel.hpp"

namespace mmlab {

void validate_sac(const SACConfig& cfg) {
    if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0))
        throw std::invalid_argument("sac.gamma: must be in [0,1]");
    if (cfg.batch_size < 1) throw std::invalid_argument("sac.batch_size: must be >= 1");
    if (cfg.buffer_capacity < cfg.batch_size)
        throw std::invalid_argument("sac.buffer_capacity: must be >= batch_size");
    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("sac.learning_rate: must be > 0");
    if (cfg.learning_starts < 0) throw std::invalid_argument("sac.learning_starts: must be >= 0");
    if (cfg.target_update_interval < 1)
        throw std::invalid_argument("sac.target_update_interval: must be >= 1");
    if (cfg.gradient_steps < 1) throw std::invalid_argument("sac.gradient_steps: must be >= 1");
    if (cfg.train_freq < 1) throw std::invalid_argument("sac.train_freq: must be >= 1");
    if (!(cfg.tau > 0.0 && cfg.tau <= 1.0)) throw std::invalid_argument("sac.tau: must be in (0,1]");
    if (cfg.total_steps < 0) throw std::invalid_argument("sac.total_steps: must be >= 0");
    if (cfg.eval_interval < 1) throw std::invalid_argument("sac.eval_interval: must be >= 1");
    if (cfg.eval_episodes < 1) throw std::invalid_argument("sac.eval_episodes: must be >= 1");
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("replay buffer: capacity must be >= 1");
    data_.resize(static_cast<std::size_t>(capacity));
}

void ReplayBuffer::push(const Transition& t) {
    data_[head_] = t;
    head_ = (head_ + 1) % static_cast<std::size_t>(capacity_);
    if (size_ < static_cast<std::size_t>(capacity_)) ++size_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= size_) throw std::out_of_range("replay buffer: index out of range");
    const auto cap = static_cast<std::size_t>(capacity_);
    const std::size_t oldest = (head_ + cap - size_) % cap;
    return data_[(oldest + i) % cap];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(Rng& rng, int batch) const {
    if (static_cast<std::size_t>(batch) > size_)
        throw std::invalid_argument("replay buffer: batch larger than stored transitions");
    // Floyd's algorithm: uniform without replacement.
    std::unordered_set<std::size_t> chosen;
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(batch));
    for (std::size_t j = size_ - static_cast<std::size_t>(batch); j < size_; ++j) {
        const std::size_t t = rng() % (j + 1);
        if (chosen.count(t)) {
            chosen.insert(j);
            out.push_back(j);
        } else {
            chosen.insert(t);
            out.push_back(t);
        }
    }
    return out;
}

AdamState AdamState::like(const Mlp& net) {
    AdamState s;
    for (const auto& l : net.layers) {
        s.m_w.emplace_back(l.w.size(), 0.0);
        s.v_w.emplace_back(l.w.size(), 0.0);
        s.m_b.emplace_back(l.b.size(), 0.0);
        s.v_b.emplace_back(l.b.size(), 0.0);
    }
    return s;
}

void AdamState::step(Mlp& net, const MlpGrads& grads, double lr) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto& l = net.layers[li];
        auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                          std::vector<double>& m, std::vector<double>& v) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
            }
        };
        update(l.w, grads.dw[li], m_w[li], v_w[li]);
        update(l.b, grads.db[li], m_b[li], v_b[li]);
        l.sync_wt();
    }
}

void AdamScalar::step(double& param, double grad, double lr) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    param -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
}

void polyak_update(Mlp& target, const Mlp& main, double tau) {
    for (std::size_t li = 0; li < target.layers.size(); ++li) {
        auto& tl = target.layers[li];
        const auto& ml = main.layers[li];
        for (std::size_t i = 0; i < tl.w.size(); ++i)
            tl.w[i] = tau * ml.w[i] + (1.0 - tau) * tl.w[i];
        for (std::size_t i = 0; i < tl.b.size(); ++i)
            tl.b[i] = tau * ml.b[i] + (1.0 - tau) * tl.b[i];
        tl.sync_wt();
    }
}

namespace {

// Forward a batch through the 4-wide actor head into clamped (mean, log_std)
// pairs; also reports which log_std entries hit the clamp (their gradient is
// zero under the hard-clamp convention).
struct ActorHeadBatch {
    std::vector<double> mean;     // batch x 2
    std::vector<double> log_std;  // batch x 2
    std::vector<char> clamped;    // batch x 2
};

void split_head(const std::vector<double>& head, int batch, ActorHeadBatch& out) {
    out.mean.resize(static_cast<std::size_t>(batch) * kActionDim);
    out.log_std.resize(static_cast<std::size_t>(batch) * kActionDim);
    out.clamped.assign(static_cast<std::size_t>(batch) * kActionDim, 0);
    for (int b = 0; b < batch; ++b) {
        for (int j = 0; j < kActionDim; ++j) {
            const std::size_t src = static_cast<std::size_t>(b) * 2 * kActionDim;
            const std::size_t dst = static_cast<std::size_t>(b) * kActionDim + j;
            out.mean[dst] = head[src + j];
            double ls = head[src + kActionDim + j];
            if (ls < kLogStdMin) {
                ls = kLogStdMin;
                out.clamped[dst] = 1;
            } else if (ls > kLogStdMax) {
                ls = kLogStdMax;
                out.clamped[dst] = 1;
            }
            out.log_std[dst] = ls;
        }
    }
}

}  // namespace

std::vector<double> compute_targets(const Mlp& actor, const Mlp& q1_target,
                                    const Mlp& q2_target,
                                    std::span<const Transition> batch, double alpha,
                                    double gamma, Rng& rng) {
    const int n = static_cast<int>(batch.size());
    thread_local Mlp::Cache actor_cache, q1_cache, q2_cache;

    std::vector<double> next_states(static_cast<std::size_t>(n) * 3);
    for (int b = 0; b < n; ++b)
        for (int j = 0; j < 3; ++j)
            next_states[static_cast<std::size_t>(b) * 3 + j] = batch[b].next_obs[j];
    actor.forward_batch(next_states.data(), n, actor_cache);

    ActorHeadBatch head;
    split_head(actor_cache.pre.back(), n, head);

    std::vector<double> sa(static_cast<std::size_t>(n) * 5);
    std::vector<double> log_probs(static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b) {
        std::array<double, 2> z{}, a{}, ls{};
        for (int j = 0; j < kActionDim; ++j) {
            const std::size_t idx = static_cast<std::size_t>(b) * kActionDim + j;
            z[j] = normal(rng);
            ls[j] = head.log_std[idx];
            a[j] = std::tanh(head.mean[idx] + std::exp(ls[j]) * z[j]);
        }
        log_probs[b] = squashed_log_prob(z, ls, a);
        for (int j = 0; j < 3; ++j)
            sa[static_cast<std::size_t>(b) * 5 + j] = batch[b].next_obs[j];
        sa[static_cast<std::size_t>(b) * 5 + 3] = a[0];
        sa[static_cast<std::size_t>(b) * 5 + 4] = a[1];
    }

    q1_target.forward_batch(sa.data(), n, q1_cache);
    q2_target.forward_batch(sa.data(), n, q2_cache);
    const auto& q1v = q1_cache.pre.back();
    const auto& q2v = q2_cache.pre.back();

    std::vector<double> y(static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b) {
        const double qmin = std::min(q1v[b], q2v[b]);
        const double not_done = batch[b].done ? 0.0 : 1.0;
        y[b] = batch[b].reward + gamma * not_done * (qmin - alpha * log_probs[b]);
    }
    return y;
}

double critic_mse(const Mlp& q, const std::vector<double>& inputs,
                  const std::vector<double>& targets, MlpGrads* grads) {
    const int n = static_cast<int>(targets.size());
    thread_local Mlp::Cache cache;
    q.forward_batch(inputs.data(), n, cache);
    const auto& out = cache.pre.back();
    double loss = 0.0;
    std::vector<double> dout(static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b) {
        const double e = out[b] - targets[b];
        loss += e * e;
        dout[b] = 2.0 * e / static_cast<double>(n);
    }
    loss /= static_cast<double>(n);
    if (grads) q.backward_batch(cache, dout, *grads, nullptr);
    return loss;
}

double actor_loss(const Mlp& actor, const Mlp& q1, const Mlp& q2,
                  const std::vector<double>& states, const std::vector<double>& z,
                  double alpha, MlpGrads* grads, double* mean_log_prob) {
    const int n = static_cast<int>(states.size() / 3);
    thread_local Mlp::Cache actor_cache, q1_cache, q2_cache;

    actor.forward_batch(states.data(), n, actor_cache);
    ActorHeadBatch head;
    split_head(actor_cache.pre.back(), n, head);

    // a = tanh(mean + exp(log_std) * z) with the provided draws.
    std::vector<double> actions(static_cast<std::size_t>(n) * kActionDim);
    std::vector<double> sa(static_cast<std::size_t>(n) * 5);
    std::vector<double> log_probs(static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b) {
        std::array<double, 2> zb{}, ab{}, lsb{};
        for (int j = 0; j < kActionDim; ++j) {
            const std::size_t idx = static_cast<std::size_t>(b) * kActionDim + j;
            zb[j] = z[idx];
            lsb[j] = head.log_std[idx];
            ab[j] = std::tanh(head.mean[idx] + std::exp(lsb[j]) * zb[j]);
            actions[idx] = ab[j];
        }
        log_probs[b] = squashed_log_prob(zb, lsb, ab);
        for (int j = 0; j < 3; ++j)
            sa[static_cast<std::size_t>(b) * 5 + j] = states[static_cast<std::size_t>(b) * 3 + j];
        sa[static_cast<std::size_t>(b) * 5 + 3] = ab[0];
        sa[static_cast<std::size_t>(b) * 5 + 4] = ab[1];
    }

    q1.forward_batch(sa.data(), n, q1_cache);
    q2.forward_batch(sa.data(), n, q2_cache);
    const auto& q1v = q1_cache.pre.back();
    const auto& q2v = q2_cache.pre.back();

    double loss = 0.0;
    double lp_sum = 0.0;
    for (int b = 0; b < n; ++b) {
        loss += alpha * log_probs[b] - std::min(q1v[b], q2v[b]);
        lp_sum += log_probs[b];
    }
    loss /= static_cast<double>(n);
    if (mean_log_prob) *mean_log_prob = lp_sum / static_cast<double>(n);
    if (!grads) return loss;

    // d(loss)/d(qmin) = -1/n, routed through the critic achieving the min.
    std::vector<double> dq1(static_cast<std::size_t>(n), 0.0);
    std::vector<double> dq2(static_cast<std::size_t>(n), 0.0);
    for (int b = 0; b < n; ++b) {
        if (q1v[b] <= q2v[b])
            dq1[b] = -1.0 / static_cast<double>(n);
        else
            dq2[b] = -1.0 / static_cast<double>(n);
    }
    const auto dsa1 = q1.backward_input(q1_cache, dq1);
    const auto dsa2 = q2.backward_input(q2_cache, dq2);

    // Head gradient: columns 0..1 mean, 2..3 log_std.
    std::vector<double> dhead(static_cast<std::size_t>(n) * 2 * kActionDim, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int b = 0; b < n; ++b) {
        for (int j = 0; j < kActionDim; ++j) {
            const std::size_t idx = static_cast<std::size_t>(b) * kActionDim + j;
            const double a = actions[idx];
            const double one_m_a2 = 1.0 - a * a;
            const double sz = std::exp(head.log_std[idx]) * z[idx];
            // d(-log(1-a^2+eps))/du = 2a(1-a^2)/(1-a^2+eps).
            const double squash = 2.0 * a * one_m_a2 / (one_m_a2 + kSquashEps);
            const double dq_da =
                dsa1[static_cast<std::size_t>(b) * 5 + 3 + j] +
                dsa2[static_cast<std::size_t>(b) * 5 + 3 + j];
            const double dmean = inv_n * alpha * squash + dq_da * one_m_a2;
            double dls = inv_n * alpha * (-1.0 + squash * sz) + dq_da * one_m_a2 * sz;
            if (head.clamped[idx]) dls = 0.0;
            const std::size_t row = static_cast<std::size_t>(b) * 2 * kActionDim;
            dhead[row + static_cast<std::size_t>(j)] = dmean;
            dhead[row + static_cast<std::size_t>(kActionDim + j)] = dls;
        }
    }
    actor.backward_batch(actor_cache, dhead, *grads, nullptr);
    return loss;
}

double alpha_loss(double log_alpha, double mean_log_prob, double target_entropy) {
    return -log_alpha * (mean_log_prob + target_entropy);
}

double alpha_loss_grad(double mean_log_prob, double target_entropy) {
    return -(mean_log_prob + target_entropy);
}

double evaluate_policy(const EnvConfig& env_cfg, const NormStats& norm, const Mlp& actor,
                       int n_episodes, std::uint64_t seed_base, double* mean_pnl,
                       double* mean_trades) {
    const NeuralController controller(actor, env_cfg.max_offset_ticks);
    std::vector<EpisodeResult> episodes(static_cast<std::size_t>(n_episodes));
    parallel_for(n_episodes, [&](int i) {
        MarketMakingEnv env(env_cfg, norm, seed_base + static_cast<std::uint64_t>(i));
        episodes[static_cast<std::size_t>(i)] = play_episode(env, controller.as_fn());
    });
    double ret = 0.0, pnl = 0.0, trades = 0.0;
    for (const auto& e : episodes) {
        ret += e.episode_return;
        pnl += e.pnl;
        trades += e.n_trades;
    }
    const double n = static_cast<double>(n_episodes);
    if (mean_pnl) *mean_pnl = pnl / n;
    if (mean_trades) *mean_trades = trades / n;
    return ret / n;
}

SacTrainer::SacTrainer(EnvConfig env_cfg, SACConfig cfg, NormStats norm,
                       std::uint64_t master_seed)
    : env_cfg_(std::move(env_cfg)),
      cfg_(cfg),
      norm_(norm),
      master_seed_(master_seed),
      buffer_(cfg.buffer_capacity) {
    validate_env(env_cfg_);
    validate_sac(cfg_);
    Rng init_rng(derive_seed(master_seed_, seed_purpose::weight_init));
    actor_ = Mlp::make({3, 64, 64, 2 * kActionDim}, init_rng);
    q1_ = Mlp::make({3 + kActionDim, 64, 64, 1}, init_rng);
    q2_ = Mlp::make({3 + kActionDim, 64, 64, 1}, init_rng);
    q1_target_ = q1_;
    q2_target_ = q2_;
    opt_actor_ = AdamState::like(actor_);
    opt_q1_ = AdamState::like(q1_);
    opt_q2_ = AdamState::like(q2_);
    policy_rng_.seed(derive_seed(master_seed_, seed_purpose::train_policy));
    batch_rng_.seed(derive_seed(master_seed_, seed_purpose::train_batch));
}

double SacTrainer::alpha() const { return std::exp(log_alpha_); }

UpdateLosses SacTrainer::update() {
    const int n = cfg_.batch_size;
    const auto indices = buffer_.sample_indices(batch_rng_, n);
    std::vector<Transition> batch;
    batch.reserve(indices.size());
    for (const auto i : indices) batch.push_back(buffer_.at(i));

    const double a_coef = alpha();
    const auto y = compute_targets(actor_, q1_target_, q2_target_, batch, a_coef, cfg_.gamma,
                                   batch_rng_);

    std::vector<double> sa(static_cast<std::size_t>(n) * 5);
    std::vector<double> states(static_cast<std::size_t>(n) * 3);
    for (int b = 0; b < n; ++b) {
        for (int j = 0; j < 3; ++j) {
            sa[static_cast<std::size_t>(b) * 5 + j] = batch[b].obs[j];
            states[static_cast<std::size_t>(b) * 3 + j] = batch[b].obs[j];
        }
        sa[static_cast<std::size_t>(b) * 5 + 3] = batch[b].action[0];
        sa[static_cast<std::size_t>(b) * 5 + 4] = batch[b].action[1];
    }

    UpdateLosses losses;
    static thread_local MlpGrads g_q1, g_q2, g_actor;
    if (g_q1.dw.empty()) g_q1 = q1_.make_grads();
    if (g_q2.dw.empty()) g_q2 = q2_.make_grads();
    if (g_actor.dw.empty()) g_actor = actor_.make_grads();

    g_q1.zero();
    losses.q1 = critic_mse(q1_, sa, y, &g_q1);
    opt_q1_.step(q1_, g_q1, cfg_.learning_rate);

    g_q2.zero();
    losses.q2 = critic_mse(q2_, sa, y, &g_q2);
    opt_q2_.step(q2_, g_q2, cfg_.learning_rate);

    std::vector<double> z(static_cast<std::size_t>(n) * kActionDim);
    for (auto& v : z) v = normal(batch_rng_);
    double mean_lp = 0.0;
    g_actor.zero();
    losses.actor = actor_loss(actor_, q1_, q2_, states, z, a_coef, &g_actor, &mean_lp);
    opt_actor_.step(actor_, g_actor, cfg_.learning_rate);

    losses.alpha_loss = alpha_loss(log_alpha_, mean_lp, cfg_.target_entropy);
    opt_alpha_.step(log_alpha_, alpha_loss_grad(mean_lp, cfg_.target_entropy),
                    cfg_.learning_rate);
    losses.alpha = alpha();

    ++update_count_;
    if (update_count_ % cfg_.target_update_interval == 0) {
        polyak_update(q1_target_, q1_, cfg_.tau);
        polyak_update(q2_target_, q2_, cfg_.tau);
    }

    if (!std::isfinite(losses.q1) || !std::isfinite(losses.q2) || !std::isfinite(losses.actor) ||
        !std::isfinite(losses.alpha))
        throw std::runtime_error("sac.update: non-finite loss encountered");
    return losses;
}

TrainResult SacTrainer::train() {
    TrainResult result;
    std::uint64_t episode = 0;
    std::optional<MarketMakingEnv> env;
    env.emplace(env_cfg_, norm_,
                derive_seed(master_seed_, seed_purpose::train_env, episode));
    ObsView obs = env->reset();

    double best_eval = -std::numeric_limits<double>::infinity();
    Mlp best_actor = actor_;
    double acc_q1 = 0.0, acc_actor = 0.0;
    long acc_updates = 0;
    const std::uint64_t eval_base = derive_seed(master_seed_, seed_purpose::train_eval);

    for (long step = 1; step <= cfg_.total_steps; ++step) {
        std::array<double, 2> a{};
        if (env_steps_ < cfg_.learning_starts) {
            a = {uniform(policy_rng_, -1.0, 1.0), uniform(policy_rng_, -1.0, 1.0)};
        } else {
            const std::array<double, 3> x = {obs.norm.inv_n, obs.norm.spread_n, obs.norm.trend_n};
            std::array<double, 2> mean{}, log_std{};
            actor_forward1(actor_, x, mean, log_std);
            a = sample_squashed(policy_rng_, mean, log_std).action;
        }
        const auto [off_a, off_b] = map_action(a, env_cfg_.max_offset_ticks);
        const auto prev = obs;
        const auto sr = env->step(off_a, off_b);
        obs = sr.obs;

        Transition tr;
        tr.obs = {prev.norm.inv_n, prev.norm.spread_n, prev.norm.trend_n};
        tr.action = a;
        tr.reward = sr.reward;
        tr.next_obs = {obs.norm.inv_n, obs.norm.spread_n, obs.norm.trend_n};
        tr.done = sr.done;
        buffer_.push(tr);
        ++env_steps_;

        if (sr.done) {
            ++episode;
            env.emplace(env_cfg_, norm_,
                        derive_seed(master_seed_, seed_purpose::train_env, episode));
            obs = env->reset();
        }

        if (env_steps_ >= cfg_.learning_starts &&
            buffer_.size() >= static_cast<std::size_t>(cfg_.batch_size) &&
            env_steps_ % cfg_.train_freq == 0) {
            for (int g = 0; g < cfg_.gradient_steps; ++g) {
                const auto losses = update();
                acc_q1 += losses.q1;
                acc_actor += losses.actor;
                ++acc_updates;
            }
        }

        if (step % cfg_.eval_interval == 0 || step == cfg_.total_steps) {
            double mean_pnl = 0.0;
            const double mean_ret = evaluate_policy(env_cfg_, norm_, actor_,
                                                    cfg_.eval_episodes, eval_base, &mean_pnl);
            CurveRow row;
            row.env_step = step;
            row.mean_eval_return = mean_ret;
            row.mean_eval_pnl = mean_pnl;
            row.q1_loss = acc_updates > 0 ? acc_q1 / static_cast<double>(acc_updates) : 0.0;
            row.actor_loss = acc_updates > 0 ? acc_actor / static_cast<double>(acc_updates) : 0.0;
            row.alpha = alpha();
            result.curve.push_back(row);
            acc_q1 = acc_actor = 0.0;
            acc_updates = 0;
            if (mean_ret > best_eval) {
                best_eval = mean_ret;
                best_actor = actor_;
            }
        }
    }

    result.final_actor = actor_;
    result.best_actor = best_actor;
    result.best_eval_return = best_eval;
    result.steps_done = env_steps_;
    return result;
}

}  // namespace mmlab
