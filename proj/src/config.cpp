#include "mmlab/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mmlab {

using nlohmann::json;

std::vector<LinParams> LinGridConfig::grid() const {
    std::vector<LinParams> g;
    for (const double t0 : theta0)
        for (const double t1 : theta1) g.push_back(LinParams{t0, t1});
    return g;
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::invalid_argument(path + ": " + what);
}

void reject_unknown(const json& j, const std::string& path,
                    const std::set<std::string>& allowed) {
    if (!j.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.count(key)) fail(path + "." + key, "unknown key");
    }
}

double get_num(const json& j, const std::string& path, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

long get_int(const json& j, const std::string& path, const char* key, long fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
    return v.get<long>();
}

bool get_bool(const json& j, const std::string& path, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_boolean()) fail(path + "." + key, "expected a boolean");
    return v.get<bool>();
}

std::string get_str(const json& j, const std::string& path, const char* key,
                    const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

std::vector<double> get_vec(const json& j, const std::string& path, const char* key,
                            std::vector<double> fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_array()) fail(path + "." + key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) fail(path + "." + key, "expected an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

std::vector<double> get_matrix(const json& j, const std::string& path, const char* key, int n) {
    if (!j.contains(key)) fail(path + "." + key, "missing required matrix");
    const auto& v = j.at(key);
    if (!v.is_array() || static_cast<int>(v.size()) != n)
        fail(path + "." + key, "expected " + std::to_string(n) + " rows");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n) * n);
    for (const auto& row : v) {
        if (!row.is_array() || static_cast<int>(row.size()) != n)
            fail(path + "." + key, "expected " + std::to_string(n) + " columns per row");
        for (const auto& x : row) {
            if (!x.is_number()) fail(path + "." + key, "expected numeric entries");
            out.push_back(x.get<double>());
        }
    }
    return out;
}

}  // namespace

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("config: parse error in " + path + ": " + e.what());
    }

    reject_unknown(j, "config",
                   {"master_seed", "env", "hawkes", "sac", "lin_grid", "backtest", "sweeps",
                    "paths"});

    RunConfig rc;
    rc.master_seed = static_cast<std::uint64_t>(get_int(j, "config", "master_seed", 1));

    if (j.contains("env")) {
        const auto& e = j.at("env");
        reject_unknown(e, "env",
                       {"dt", "horizon", "tick", "phi", "max_inventory", "z1", "z2", "z3",
                        "maker_fee", "taker_fee", "p0", "init_spread_ticks", "max_offset_ticks",
                        "marks", "cancel_trunc", "round_jumps", "agent_feedback"});
        auto& env = rc.env;
        env.dt = get_num(e, "env", "dt", env.dt);
        env.horizon = get_num(e, "env", "horizon", env.horizon);
        env.tick = get_num(e, "env", "tick", env.tick);
        env.phi = get_num(e, "env", "phi", env.phi);
        env.max_inventory = static_cast<int>(get_int(e, "env", "max_inventory", env.max_inventory));
        env.z1 = get_num(e, "env", "z1", env.z1);
        env.z2 = get_num(e, "env", "z2", env.z2);
        env.z3 = get_num(e, "env", "z3", env.z3);
        env.maker_fee = get_num(e, "env", "maker_fee", env.maker_fee);
        env.taker_fee = get_num(e, "env", "taker_fee", env.taker_fee);
        env.p0 = get_num(e, "env", "p0", env.p0);
        env.init_spread_ticks = get_num(e, "env", "init_spread_ticks", env.init_spread_ticks);
        env.max_offset_ticks =
            static_cast<int>(get_int(e, "env", "max_offset_ticks", env.max_offset_ticks));
        if (e.contains("marks")) {
            const auto& m = e.at("marks");
            reject_unknown(m, "env.marks", {"loc", "scale"});
            env.marks.loc = get_num(m, "env.marks", "loc", env.marks.loc);
            env.marks.scale = get_num(m, "env.marks", "scale", env.marks.scale);
        }
        const std::string trunc = get_str(e, "env", "cancel_trunc", "spread");
        if (trunc == "spread")
            env.cancel_trunc = CancelTruncation::spread;
        else if (trunc == "none")
            env.cancel_trunc = CancelTruncation::none;
        else
            fail("env.cancel_trunc", "expected \"spread\" or \"none\"");
        env.round_jumps = get_bool(e, "env", "round_jumps", env.round_jumps);
        env.agent_feedback = get_bool(e, "env", "agent_feedback", env.agent_feedback);
    }

    if (!j.contains("hawkes")) fail("hawkes", "missing required section");
    {
        const auto& h = j.at("hawkes");
        reject_unknown(h, "hawkes", {"mu", "alpha", "beta"});
        auto mu = get_vec(h, "hawkes", "mu", {});
        if (mu.empty()) fail("hawkes.mu", "missing required vector");
        const int n = static_cast<int>(mu.size());
        rc.env.hawkes.dim = n;
        rc.env.hawkes.mu = std::move(mu);
        rc.env.hawkes.alpha = get_matrix(h, "hawkes", "alpha", n);
        rc.env.hawkes.beta = get_matrix(h, "hawkes", "beta", n);
    }

    if (j.contains("sac")) {
        const auto& s = j.at("sac");
        reject_unknown(s, "sac",
                       {"gamma", "batch_size", "buffer_capacity", "learning_rate",
                        "learning_starts", "target_entropy", "target_update_interval",
                        "gradient_steps", "train_freq", "tau", "total_steps", "eval_interval",
                        "eval_episodes"});
        auto& sac = rc.sac;
        sac.gamma = get_num(s, "sac", "gamma", sac.gamma);
        sac.batch_size = static_cast<int>(get_int(s, "sac", "batch_size", sac.batch_size));
        sac.buffer_capacity =
            static_cast<int>(get_int(s, "sac", "buffer_capacity", sac.buffer_capacity));
        sac.learning_rate = get_num(s, "sac", "learning_rate", sac.learning_rate);
        sac.learning_starts =
            static_cast<int>(get_int(s, "sac", "learning_starts", sac.learning_starts));
        sac.target_entropy = get_num(s, "sac", "target_entropy", sac.target_entropy);
        sac.target_update_interval = static_cast<int>(
            get_int(s, "sac", "target_update_interval", sac.target_update_interval));
        sac.gradient_steps =
            static_cast<int>(get_int(s, "sac", "gradient_steps", sac.gradient_steps));
        sac.train_freq = static_cast<int>(get_int(s, "sac", "train_freq", sac.train_freq));
        sac.tau = get_num(s, "sac", "tau", sac.tau);
        sac.total_steps = get_int(s, "sac", "total_steps", sac.total_steps);
        sac.eval_interval =
            static_cast<int>(get_int(s, "sac", "eval_interval", sac.eval_interval));
        sac.eval_episodes =
            static_cast<int>(get_int(s, "sac", "eval_episodes", sac.eval_episodes));
    }

    if (j.contains("lin_grid")) {
        const auto& g = j.at("lin_grid");
        reject_unknown(g, "lin_grid", {"theta0", "theta1", "episodes"});
        rc.lin_grid.theta0 = get_vec(g, "lin_grid", "theta0", rc.lin_grid.theta0);
        rc.lin_grid.theta1 = get_vec(g, "lin_grid", "theta1", rc.lin_grid.theta1);
        rc.lin_grid.episodes =
            static_cast<int>(get_int(g, "lin_grid", "episodes", rc.lin_grid.episodes));
    }

    if (j.contains("backtest")) {
        const auto& b = j.at("backtest");
        reject_unknown(b, "backtest", {"episodes"});
        rc.backtest.episodes =
            static_cast<int>(get_int(b, "backtest", "episodes", rc.backtest.episodes));
    }

    if (j.contains("sweeps")) {
        const auto& s = j.at("sweeps");
        reject_unknown(s, "sweeps", {"noise_variances", "maker_fees", "retrain_steps", "episodes"});
        rc.sweeps.noise_variances =
            get_vec(s, "sweeps", "noise_variances", rc.sweeps.noise_variances);
        rc.sweeps.maker_fees = get_vec(s, "sweeps", "maker_fees", rc.sweeps.maker_fees);
        rc.sweeps.retrain_steps = get_int(s, "sweeps", "retrain_steps", rc.sweeps.retrain_steps);
        rc.sweeps.episodes = static_cast<int>(get_int(s, "sweeps", "episodes", rc.sweeps.episodes));
    }

    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        reject_unknown(p, "paths", {"norm_stats", "final_checkpoint", "best_checkpoint"});
        rc.paths.norm_stats = get_str(p, "paths", "norm_stats", rc.paths.norm_stats);
        rc.paths.final_checkpoint =
            get_str(p, "paths", "final_checkpoint", rc.paths.final_checkpoint);
        rc.paths.best_checkpoint = get_str(p, "paths", "best_checkpoint", rc.paths.best_checkpoint);
    }

    validate_config(rc);
    return rc;
}

void validate_config(const RunConfig& cfg) {
    validate_env(cfg.env);
    validate_sac(cfg.sac);
    if (cfg.lin_grid.theta0.empty() || cfg.lin_grid.theta1.empty())
        fail("lin_grid", "theta grids must be non-empty");
    for (const double t : cfg.lin_grid.theta0)
        if (!(t >= 0.0)) fail("lin_grid.theta0", "entries must be >= 0");
    for (const double t : cfg.lin_grid.theta1)
        if (!(t >= 0.0)) fail("lin_grid.theta1", "entries must be >= 0");
    if (cfg.lin_grid.episodes < 1) fail("lin_grid.episodes", "must be >= 1");
    if (cfg.backtest.episodes < 0) fail("backtest.episodes", "must be >= 0");
    for (const double v : cfg.sweeps.noise_variances)
        if (!(v >= 0.0)) fail("sweeps.noise_variances", "entries must be >= 0");
    for (const double f : cfg.sweeps.maker_fees)
        if (!(f >= 0.0)) fail("sweeps.maker_fees", "entries must be >= 0");
    if (cfg.sweeps.retrain_steps < 0) fail("sweeps.retrain_steps", "must be >= 0");
    if (cfg.sweeps.episodes < 2) fail("sweeps.episodes", "must be >= 2");
}

json config_to_json(const RunConfig& cfg) {
    json j;
    j["env"] = {
        {"dt", cfg.env.dt},
        {"horizon", cfg.env.horizon},
        {"tick", cfg.env.tick},
        {"phi", cfg.env.phi},
        {"max_inventory", cfg.env.max_inventory},
        {"z1", cfg.env.z1},
        {"z2", cfg.env.z2},
        {"z3", cfg.env.z3},
        {"maker_fee", cfg.env.maker_fee},
        {"taker_fee", cfg.env.taker_fee},
        {"p0", cfg.env.p0},
        {"init_spread_ticks", cfg.env.init_spread_ticks},
        {"max_offset_ticks", cfg.env.max_offset_ticks},
        {"marks", {{"loc", cfg.env.marks.loc}, {"scale", cfg.env.marks.scale}}},
        {"cancel_trunc",
         cfg.env.cancel_trunc == CancelTruncation::spread ? "spread" : "none"},
        {"round_jumps", cfg.env.round_jumps},
        {"agent_feedback", cfg.env.agent_feedback},
    };
    json alpha = json::array();
    json beta = json::array();
    const int n = cfg.env.hawkes.dim;
    for (int k = 0; k < n; ++k) {
        json ra = json::array();
        json rb = json::array();
        for (int l = 0; l < n; ++l) {
            ra.push_back(cfg.env.hawkes.a(k, l));
            rb.push_back(cfg.env.hawkes.b(k, l));
        }
        alpha.push_back(ra);
        beta.push_back(rb);
    }
    j["hawkes"] = {{"mu", cfg.env.hawkes.mu}, {"alpha", alpha}, {"beta", beta}};
    j["sac"] = {
        {"gamma", cfg.sac.gamma},
        {"batch_size", cfg.sac.batch_size},
        {"buffer_capacity", cfg.sac.buffer_capacity},
        {"learning_rate", cfg.sac.learning_rate},
        {"learning_starts", cfg.sac.learning_starts},
        {"target_entropy", cfg.sac.target_entropy},
        {"target_update_interval", cfg.sac.target_update_interval},
        {"gradient_steps", cfg.sac.gradient_steps},
        {"train_freq", cfg.sac.train_freq},
        {"tau", cfg.sac.tau},
        {"total_steps", cfg.sac.total_steps},
        {"eval_interval", cfg.sac.eval_interval},
        {"eval_episodes", cfg.sac.eval_episodes},
    };
    j["lin_grid"] = {{"theta0", cfg.lin_grid.theta0},
                     {"theta1", cfg.lin_grid.theta1},
                     {"episodes", cfg.lin_grid.episodes}};
    j["backtest"] = {{"episodes", cfg.backtest.episodes}};
    j["sweeps"] = {{"noise_variances", cfg.sweeps.noise_variances},
                   {"maker_fees", cfg.sweeps.maker_fees},
                   {"retrain_steps", cfg.sweeps.retrain_steps},
                   {"episodes", cfg.sweeps.episodes}};
    j["paths"] = {{"norm_stats", cfg.paths.norm_stats},
                  {"final_checkpoint", cfg.paths.final_checkpoint},
                  {"best_checkpoint", cfg.paths.best_checkpoint}};
    return j;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

std::uint64_t run_hash(const RunConfig& cfg, const json& command) {
    json j;
    j["config"] = config_to_json(cfg);
    j["command"] = command;
    return fnv1a64(j.dump());
}

void save_norm_stats(const std::string& path, const NormStats& stats,
                     const std::string& config_hash_hex, std::uint64_t master_seed,
                     int n_steps) {
    json j;
    j["mean_spread"] = stats.mean_spread;
    j["std_spread"] = stats.std_spread;
    j["mean_trend"] = stats.mean_trend;
    j["std_trend"] = stats.std_trend;
    j["config_hash"] = config_hash_hex;
    j["master_seed"] = master_seed;
    j["n_steps"] = n_steps;
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("norm stats: cannot open " + path);
    f << j.dump(2) << "\n";
}

NormStats load_norm_stats(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("norm stats: cannot open " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("norm stats: parse error in " + path + ": " + e.what());
    }
    NormStats s;
    s.mean_spread = j.at("mean_spread").get<double>();
    s.std_spread = j.at("std_spread").get<double>();
    s.mean_trend = j.at("mean_trend").get<double>();
    s.std_trend = j.at("std_trend").get<double>();
    if (!(s.std_spread > 0.0) || !(s.std_trend > 0.0))
        throw std::runtime_error("norm stats: non-positive standard deviation in " + path);
    return s;
}

std::uint64_t file_bytes_hash(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("hash: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    const std::string s = ss.str();
    return fnv1a64(s);
}

}  // namespace mmlab
