#include "mmlab/backtest.hpp"

#include <cmath>
#include <stdexcept>

#include "mmlab/parallel.hpp"
#include "mmlab/stats.hpp"

namespace mmlab {

EpisodeRecord EpisodeRecord::from_episode(std::uint64_t seed, const EpisodeResult& e,
                                          double phi) {
    const double replay = e.pnl - phi * e.inv_integral;
    if (std::fabs(replay - e.episode_return) > 1e-9 * std::max(1.0, std::fabs(e.pnl)))
        throw std::logic_error("episode record: return != pnl - phi * integral |I|");
    EpisodeRecord r;
    r.seed = seed;
    r.pnl = e.pnl;
    r.episode_return = e.episode_return;
    r.terminal_inventory = e.terminal_inventory;
    r.map = e.map;
    r.n_trades = e.n_trades;
    return r;
}

std::vector<EpisodeRecord> run_monte_carlo(const EnvConfig& cfg, const NormStats& norm,
                                           const Controller& controller, int n_episodes,
                                           std::uint64_t seed_base) {
    std::vector<EpisodeRecord> records(static_cast<std::size_t>(n_episodes));
    parallel_for(n_episodes, [&](int i) {
        const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(i);
        MarketMakingEnv env(cfg, norm, seed);
        const auto e = play_episode(env, controller.as_fn());
        records[static_cast<std::size_t>(i)] = EpisodeRecord::from_episode(seed, e, cfg.phi);
    });
    return records;
}

namespace {

DistStats dist_stats(const std::vector<double>& xs) {
    DistStats d;
    d.mean = stats::mean(xs);
    d.stddev = stats::sample_stddev(xs);
    d.skewness = stats::skewness(xs);
    d.kurtosis = stats::excess_kurtosis(xs);
    const auto [jb, p] = stats::jarque_bera(xs);
    d.jarque_bera = jb;
    d.jarque_bera_p = p;
    d.p10 = stats::percentile(xs, 10.0);
    d.p20 = stats::percentile(xs, 20.0);
    d.p80 = stats::percentile(xs, 80.0);
    d.p90 = stats::percentile(xs, 90.0);
    return d;
}

}  // namespace

MetricsSummary summarize(const std::vector<EpisodeRecord>& records) {
    if (records.size() < 2) throw std::invalid_argument("summarize: need at least 2 records");
    std::vector<double> pnls, invs, returns;
    pnls.reserve(records.size());
    invs.reserve(records.size());
    returns.reserve(records.size());
    double map_sum = 0.0, trades_sum = 0.0;
    for (const auto& r : records) {
        pnls.push_back(r.pnl);
        invs.push_back(static_cast<double>(r.terminal_inventory));
        returns.push_back(r.episode_return);
        map_sum += r.map;
        trades_sum += static_cast<double>(r.n_trades);
    }
    MetricsSummary s;
    s.n_episodes = static_cast<int>(records.size());
    s.mean_return = stats::mean(returns);
    s.pnl = dist_stats(pnls);
    s.inventory = dist_stats(invs);
    s.abs_mean_terminal_inv = std::fabs(s.inventory.mean);
    s.sharpe = s.pnl.stddev > 0.0 ? s.pnl.mean / s.pnl.stddev : 0.0;
    s.map = map_sum / static_cast<double>(records.size());
    s.pnl_over_map = s.map > 0.0 ? s.pnl.mean / s.map : 0.0;
    s.mean_trades = trades_sum / static_cast<double>(records.size());
    return s;
}

std::vector<NoiseSweepEntry> sweep_noise(const EnvConfig& cfg, const NormStats& norm,
                                         const Controller& controller,
                                         const std::vector<double>& variances, int n_episodes,
                                         std::uint64_t seed_base) {
    std::vector<NoiseSweepEntry> out;
    for (const double v : variances) {
        if (v < 0.0) throw std::invalid_argument("sweep_noise: variance must be >= 0");
        const double scale = std::sqrt(v);
        std::vector<EpisodeRecord> records(static_cast<std::size_t>(n_episodes));
        parallel_for(n_episodes, [&](int i) {
            const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(i);
            EnvConfig perturbed = cfg;
            if (v > 0.0) {
                Rng noise_rng(derive_seed(seed_base, seed_purpose::noise,
                                          static_cast<std::uint64_t>(i)));
                for (auto& mu : perturbed.hawkes.mu)
                    mu = std::max(0.0, mu + scale * normal(noise_rng));
                validate_hawkes(perturbed.hawkes);
            }
            MarketMakingEnv env(perturbed, norm, seed);
            const auto e = play_episode(env, controller.as_fn());
            records[static_cast<std::size_t>(i)] = EpisodeRecord::from_episode(seed, e, cfg.phi);
        });
        out.push_back(NoiseSweepEntry{v, summarize(records)});
    }
    return out;
}

std::vector<FeeSweepEntry> sweep_fees(const EnvConfig& cfg, const NormStats& norm,
                                      const std::vector<const Controller*>& controllers,
                                      const std::vector<double>& maker_fees, int n_episodes,
                                      std::uint64_t seed_base, const RetrainFn& retrain) {
    std::vector<FeeSweepEntry> out;
    for (const double fee : maker_fees) {
        if (fee < 0.0) throw std::invalid_argument("sweep_fees: fee must be >= 0");
        EnvConfig fee_cfg = cfg;
        fee_cfg.maker_fee = fee;
        for (const Controller* c : controllers) {
            const auto records = run_monte_carlo(fee_cfg, norm, *c, n_episodes, seed_base);
            out.push_back(FeeSweepEntry{fee, c->name(), summarize(records)});
        }
        if (retrain) {
            const auto trained = retrain(fee_cfg);
            const auto records = run_monte_carlo(fee_cfg, norm, *trained, n_episodes, seed_base);
            out.push_back(FeeSweepEntry{fee, trained->name() + "-retrained", summarize(records)});
        }
    }
    return out;
}

}  // namespace mmlab
