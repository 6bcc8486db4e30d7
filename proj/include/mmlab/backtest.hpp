#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mmlab/env.hpp"
#include "mmlab/strategies.hpp"

namespace mmlab {

struct EpisodeRecord {
    std::uint64_t seed = 0;
    double pnl = 0.0;             // terminal wealth W_T
    double episode_return = 0.0;  // sum of rewards
    int terminal_inventory = 0;
    double map = 0.0;  // mean absolute position over step boundaries
    int n_trades = 0;

    // Checked on write: episode_return == pnl - phi * integral |I| dt.
    static EpisodeRecord from_episode(std::uint64_t seed, const EpisodeResult& e, double phi);
};

struct DistStats {
    double mean = 0.0;
    double stddev = 0.0;  // sample (n-1)
    double skewness = 0.0;
    double kurtosis = 0.0;  // excess
    double jarque_bera = 0.0;
    double jarque_bera_p = 0.0;
    double p10 = 0.0, p20 = 0.0, p80 = 0.0, p90 = 0.0;
};

struct MetricsSummary {
    int n_episodes = 0;
    double mean_return = 0.0;
    DistStats pnl{};
    DistStats inventory{};
    double abs_mean_terminal_inv = 0.0;
    double sharpe = 0.0;        // pnl.mean / pnl.stddev
    double map = 0.0;           // mean over episodes
    double pnl_over_map = 0.0;  // pnl.mean / map
    double mean_trades = 0.0;
};

// Monte Carlo evaluation: n_episodes with seeds seed_base..seed_base+n-1,
// deterministic controllers, records in seed order. Episodes run in parallel
// (MM_SIM_THREADS) without affecting results.
std::vector<EpisodeRecord> run_monte_carlo(const EnvConfig& cfg, const NormStats& norm,
                                           const Controller& controller, int n_episodes,
                                           std::uint64_t seed_base);

MetricsSummary summarize(const std::vector<EpisodeRecord>& records);

// Intensity-noise sensitivity: per episode one Gaussian(0, variance) draw per
// Hawkes dimension is added to the baselines (clamped at zero, stability
// re-checked). The same per-episode noise draws are scaled across variance
// levels, and variance 0 reproduces the unperturbed run exactly.
struct NoiseSweepEntry {
    double variance = 0.0;
    MetricsSummary summary{};
};

std::vector<NoiseSweepEntry> sweep_noise(const EnvConfig& cfg, const NormStats& norm,
                                         const Controller& controller,
                                         const std::vector<double>& variances, int n_episodes,
                                         std::uint64_t seed_base);

// Maker-fee sensitivity. Every controller is evaluated under every fee; when
// a retrain hook is given it is invoked once per fee level with the adjusted
// config and the resulting controller is reported as well.
struct FeeSweepEntry {
    double maker_fee = 0.0;
    std::string controller;
    MetricsSummary summary{};
};

using RetrainFn = std::function<std::unique_ptr<Controller>(const EnvConfig& fee_cfg)>;

std::vector<FeeSweepEntry> sweep_fees(const EnvConfig& cfg, const NormStats& norm,
                                      const std::vector<const Controller*>& controllers,
                                      const std::vector<double>& maker_fees, int n_episodes,
                                      std::uint64_t seed_base, const RetrainFn& retrain = {});

}  // namespace mmlab
