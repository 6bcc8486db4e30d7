#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mmlab/env.hpp"
#include "mmlab/sac.hpp"
#include "mmlab/strategies.hpp"

namespace mmlab {

struct LinGridConfig {
    std::vector<double> theta0{0.0, 1.0, 2.0, 3.0, 4.0};
    std::vector<double> theta1{0.0, 0.5, 1.0, 1.5, 2.0};
    int episodes = 200;

    std::vector<LinParams> grid() const;
};

struct BacktestConfig {
    int episodes = 1000;
};

struct SweepConfig {
    std::vector<double> noise_variances{0.1, 0.2, 0.3};
    std::vector<double> maker_fees{0.0, 0.002, 0.004, 0.006};
    long retrain_steps = 50000;
    int episodes = 1000;
};

struct PathsConfig {
    std::string norm_stats = "norm_stats.json";
    std::string final_checkpoint = "final.ckpt";
    std::string best_checkpoint = "best.ckpt";
};

struct RunConfig {
    std::uint64_t master_seed = 1;
    EnvConfig env{};
    SACConfig sac{};
    LinGridConfig lin_grid{};
    BacktestConfig backtest{};
    SweepConfig sweeps{};
    PathsConfig paths{};
};

// Parses and fully validates a config file. Unknown keys are rejected and
// every error names the offending key path.
RunConfig load_config(const std::string& path);
void validate_config(const RunConfig& cfg);

// Canonical JSON image of a config (sorted keys, round-trip numbers); the
// basis of the run hash.
nlohmann::json config_to_json(const RunConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t h);

// Hash identifying a run up to the master seed: canonical config (seed
// excluded) plus the effective command parameters. Artifacts carry this hash
// and the seed; equal pairs imply identical outputs.
std::uint64_t run_hash(const RunConfig& cfg, const nlohmann::json& command);

void save_norm_stats(const std::string& path, const NormStats& stats,
                     const std::string& config_hash_hex, std::uint64_t master_seed,
                     int n_steps);
NormStats load_norm_stats(const std::string& path);

// FNV-1a over a file's raw bytes; links checkpoints to the normalization
// statistics they were trained with.
std::uint64_t file_bytes_hash(const std::string& path);

}  // namespace mmlab
