// Command-line surface: calibration, training, backtesting, grid search,
// sensitivity sweeps and raw market simulation. Every output file embeds the
// run hash and master seed; reruns with identical flags are byte-identical.

#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmlab/backtest.hpp"
#include "mmlab/config.hpp"
#include "mmlab/env.hpp"
#include "mmlab/net.hpp"
#include "mmlab/sac.hpp"
#include "mmlab/stats.hpp"
#include "mmlab/strategies.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mmlab;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "run configuration file (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "master seed override");
}

RunConfig load_run_config(const CommonOpts& opts) {
    RunConfig rc = load_config(opts.config_path);
    if (opts.seed) rc.master_seed = *opts.seed;
    fs::create_directories(opts.out_dir);
    return rc;
}

std::string resolve_path(const std::string& out_dir, const std::string& p) {
    fs::path path(p);
    if (path.is_absolute()) return p;
    return (fs::path(out_dir) / path).string();
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_artifact(const std::string& path, const std::string& hash_hex,
                            std::uint64_t master_seed) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open output file " + path);
    f << "# config_hash=" << hash_hex << " master_seed=" << master_seed << "\n";
    return f;
}

json summary_to_json(const MetricsSummary& s) {
    json j;
    j["Episodes"] = s.n_episodes;
    j["Mean episode return"] = s.mean_return;
    j["Mean PnL"] = s.pnl.mean;
    j["Std PnL"] = s.pnl.stddev;
    j["Kurtosis PnL"] = s.pnl.kurtosis;
    j["Skew PnL"] = s.pnl.skewness;
    j["Jarque Bera PnL"] = s.pnl.jarque_bera;
    j["Jarque Bera PnL p-value"] = s.pnl.jarque_bera_p;
    j["10th percentile PnL"] = s.pnl.p10;
    j["20th percentile PnL"] = s.pnl.p20;
    j["80th percentile PnL"] = s.pnl.p80;
    j["90th percentile PnL"] = s.pnl.p90;
    j["Sharpe Ratio"] = s.sharpe;
    j["Abs. mean terminal inv."] = s.abs_mean_terminal_inv;
    j["Mean terminal inv."] = s.inventory.mean;
    j["Std terminal inv."] = s.inventory.stddev;
    j["Kurtosis inv."] = s.inventory.kurtosis;
    j["Skew inv."] = s.inventory.skewness;
    j["Jarque Bera inv."] = s.inventory.jarque_bera;
    j["Jarque Bera inv. p-value"] = s.inventory.jarque_bera_p;
    j["10th percentile inv."] = s.inventory.p10;
    j["20th percentile inv."] = s.inventory.p20;
    j["80th percentile inv."] = s.inventory.p80;
    j["90th percentile inv."] = s.inventory.p90;
    j["Mean Absolute Position (MAP)"] = s.map;
    j["(Mean PnL)/MAP"] = s.pnl_over_map;
    j["Mean transactions"] = s.mean_trades;
    return j;
}

void write_summary_text(std::ofstream& f, const MetricsSummary& s) {
    const auto j = summary_to_json(s);
    const char* rows[] = {"Episodes",
                          "Mean episode return",
                          "Mean PnL",
                          "Std PnL",
                          "Kurtosis PnL",
                          "Skew PnL",
                          "Jarque Bera PnL",
                          "Jarque Bera PnL p-value",
                          "10th percentile PnL",
                          "20th percentile PnL",
                          "80th percentile PnL",
                          "90th percentile PnL",
                          "Sharpe Ratio",
                          "Abs. mean terminal inv.",
                          "Mean terminal inv.",
                          "Std terminal inv.",
                          "Kurtosis inv.",
                          "Skew inv.",
                          "Jarque Bera inv.",
                          "Jarque Bera inv. p-value",
                          "10th percentile inv.",
                          "20th percentile inv.",
                          "80th percentile inv.",
                          "90th percentile inv.",
                          "Mean Absolute Position (MAP)",
                          "(Mean PnL)/MAP",
                          "Mean transactions"};
    for (const char* row : rows) {
        const auto& v = j.at(row);
        char buf[64];
        if (v.is_number_integer())
            std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v.get<long>()));
        else
            std::snprintf(buf, sizeof(buf), "%.6f", v.get<double>());
        f << row << ": " << buf << "\n";
    }
}

const char* kSummaryCsvColumns =
    "mean_return,mean_pnl,std_pnl,skew_pnl,kurt_pnl,jb_pnl,jb_pnl_p,p10_pnl,p20_pnl,p80_pnl,"
    "p90_pnl,sharpe,mean_inv,std_inv,map,pnl_over_map,mean_trades";

void write_summary_csv_fields(std::ofstream& f, const MetricsSummary& s) {
    f << num(s.mean_return) << ',' << num(s.pnl.mean) << ',' << num(s.pnl.stddev) << ','
      << num(s.pnl.skewness) << ',' << num(s.pnl.kurtosis) << ',' << num(s.pnl.jarque_bera)
      << ',' << num(s.pnl.jarque_bera_p) << ',' << num(s.pnl.p10) << ',' << num(s.pnl.p20) << ','
      << num(s.pnl.p80) << ',' << num(s.pnl.p90) << ',' << num(s.sharpe) << ','
      << num(s.inventory.mean) << ',' << num(s.inventory.stddev) << ',' << num(s.map) << ','
      << num(s.pnl_over_map) << ',' << num(s.mean_trades);
}

struct ControllerChoice {
    std::unique_ptr<Controller> controller;
    json descriptor;
};

LinParams read_lin_params(const std::string& path) {
    LinParams p{1.0, 0.5};
    if (path.empty()) return p;
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open lin params file " + path);
    json j;
    f >> j;
    p.theta0 = j.at("theta0").get<double>();
    p.theta1 = j.at("theta1").get<double>();
    return p;
}

ControllerChoice make_controller(const std::string& spec, const std::string& lin_params_path,
                                 const RunConfig& rc, const std::string& norm_path) {
    ControllerChoice choice;
    if (spec == "sym") {
        choice.controller = std::make_unique<SymController>();
        choice.descriptor = {{"controller", "sym"}};
        return choice;
    }
    if (spec == "lin") {
        const LinParams p = read_lin_params(lin_params_path);
        choice.controller = std::make_unique<LinController>(p);
        choice.descriptor = {{"controller", "lin"}, {"theta0", p.theta0}, {"theta1", p.theta1}};
        return choice;
    }
    // Anything else is a checkpoint path.
    const auto ckpt = load_checkpoint(spec);
    const auto norm_hash = file_bytes_hash(norm_path);
    if (ckpt.norm_hash != norm_hash)
        throw std::runtime_error(
            "checkpoint " + spec +
            " was trained with different normalization statistics than " + norm_path);
    choice.controller = std::make_unique<NeuralController>(ckpt.actor, rc.env.max_offset_ticks);
    choice.descriptor = {{"controller", "checkpoint"},
                         {"checkpoint_hash", hash_hex(file_bytes_hash(spec))}};
    return choice;
}

NormStats require_norm(const std::string& norm_path) {
    if (!fs::exists(norm_path))
        throw std::runtime_error("normalization statistics not found at " + norm_path +
                                 " (run calibrate-norm first)");
    return load_norm_stats(norm_path);
}

NormStats norm_or_neutral(const std::string& norm_path, bool neural) {
    if (neural) return require_norm(norm_path);
    return fs::exists(norm_path) ? load_norm_stats(norm_path) : NormStats{};
}

int cmd_calibrate(const CommonOpts& opts, int n_steps) {
    const RunConfig rc = load_run_config(opts);
    const json command = {{"cmd", "calibrate-norm"}, {"steps", n_steps}};
    const auto hash = hash_hex(run_hash(rc, command));
    const NormStats stats = calibrate_normalization(rc.env, rc.master_seed, n_steps);
    const std::string path = resolve_path(opts.out_dir, rc.paths.norm_stats);
    save_norm_stats(path, stats, hash, rc.master_seed, n_steps);
    std::cout << "norm stats written to " << path << "\n"
              << "  spread: mean=" << stats.mean_spread << " std=" << stats.std_spread << "\n"
              << "  trend:  mean=" << stats.mean_trend << " std=" << stats.std_trend << "\n";
    return 0;
}

int cmd_train(const CommonOpts& opts, std::optional<long> steps_override) {
    RunConfig rc = load_run_config(opts);
    if (steps_override) rc.sac.total_steps = *steps_override;
    const json command = {{"cmd", "train"}};
    const auto hash = hash_hex(run_hash(rc, command));
    const std::string norm_path = resolve_path(opts.out_dir, rc.paths.norm_stats);
    const NormStats norm = require_norm(norm_path);
    const auto norm_hash = file_bytes_hash(norm_path);

    SacTrainer trainer(rc.env, rc.sac, norm, rc.master_seed);
    TrainResult result;
    try {
        result = trainer.train();
    } catch (const std::exception& e) {
        const std::string diag = resolve_path(opts.out_dir, "diagnostic.ckpt");
        save_checkpoint(diag, trainer.actor(), norm_hash);
        std::cerr << "training aborted: " << e.what() << "\ndiagnostic checkpoint: " << diag
                  << "\n";
        return 3;
    }

    const std::string final_path = resolve_path(opts.out_dir, rc.paths.final_checkpoint);
    const std::string best_path = resolve_path(opts.out_dir, rc.paths.best_checkpoint);
    save_checkpoint(final_path, result.final_actor, norm_hash);
    save_checkpoint(best_path, result.best_actor, norm_hash);

    auto curve = open_artifact(resolve_path(opts.out_dir, "training_curve.csv"), hash,
                               rc.master_seed);
    curve << "env_step,mean_eval_return,mean_eval_pnl,q1_loss,actor_loss,alpha\n";
    for (const auto& row : result.curve)
        curve << row.env_step << ',' << num(row.mean_eval_return) << ','
              << num(row.mean_eval_pnl) << ',' << num(row.q1_loss) << ','
              << num(row.actor_loss) << ',' << num(row.alpha) << "\n";

    std::cout << "trained " << result.steps_done << " steps; best eval return "
              << result.best_eval_return << "\ncheckpoints: " << final_path << ", " << best_path
              << "\n";
    return 0;
}

void write_trace_files(const std::string& out_dir, const std::string& hash,
                       std::uint64_t master_seed, const MarketMakingEnv& env,
                       const std::string& events_name, const std::string& steps_name) {
    auto events = open_artifact(resolve_path(out_dir, events_name), hash, master_seed);
    events << "time,etype,jump_ticks,source,bid,ask\n";
    for (const auto& te : env.event_log())
        events << num(te.ev.time) << ',' << event_type_name(te.ev.etype) << ','
               << num(te.ev.jump_ticks) << ','
               << (te.ev.source == EventSource::agent ? "agent" : "market") << ','
               << num(te.bid_after) << ',' << num(te.ask_after) << "\n";
    auto steps = open_artifact(resolve_path(out_dir, steps_name), hash, master_seed);
    steps << "t,I,X,bid,ask,off_a,off_b,fills,reward\n";
    for (const auto& row : env.step_log())
        steps << num(row.t) << ',' << row.inventory << ',' << num(row.cash) << ','
              << num(row.bid) << ',' << num(row.ask) << ',' << row.off_a << ',' << row.off_b
              << ',' << row.fills << ',' << num(row.reward) << "\n";
}

int cmd_backtest(const CommonOpts& opts, const std::string& controller_spec,
                 std::optional<int> episodes_override, const std::string& lin_params_path,
                 bool trace) {
    RunConfig rc = load_run_config(opts);
    if (episodes_override) rc.backtest.episodes = *episodes_override;
    const std::string norm_path = resolve_path(opts.out_dir, rc.paths.norm_stats);
    const bool neural = controller_spec != "sym" && controller_spec != "lin";
    const NormStats norm = norm_or_neutral(norm_path, neural);
    auto choice = make_controller(controller_spec, lin_params_path, rc, norm_path);
    json command = {{"cmd", "backtest"}, {"episodes", rc.backtest.episodes}, {"trace", trace}};
    command.update(choice.descriptor);
    const auto hash = hash_hex(run_hash(rc, command));

    const std::uint64_t seed_base = derive_seed(rc.master_seed, seed_purpose::evaluation);
    const auto records =
        run_monte_carlo(rc.env, norm, *choice.controller, rc.backtest.episodes, seed_base);

    auto csv = open_artifact(resolve_path(opts.out_dir, "episodes.csv"), hash, rc.master_seed);
    csv << "seed,pnl,return,terminal_inv,map,n_trades\n";
    for (const auto& r : records)
        csv << r.seed << ',' << num(r.pnl) << ',' << num(r.episode_return) << ','
            << r.terminal_inventory << ',' << num(r.map) << ',' << r.n_trades << "\n";

    if (records.size() >= 2) {
        const auto summary = summarize(records);
        auto txt = open_artifact(resolve_path(opts.out_dir, "summary.txt"), hash, rc.master_seed);
        txt << "controller: " << choice.controller->name() << "\n";
        write_summary_text(txt, summary);
        json js = summary_to_json(summary);
        js["config_hash"] = hash;
        js["master_seed"] = rc.master_seed;
        js["controller"] = choice.controller->name();
        std::ofstream jf(resolve_path(opts.out_dir, "summary.json"), std::ios::trunc);
        jf << js.dump(2) << "\n";
        std::cout << "mean pnl " << summary.pnl.mean << ", sharpe " << summary.sharpe
                  << ", map " << summary.map << ", (mean pnl)/map " << summary.pnl_over_map
                  << "\n";
    }

    if (trace && !records.empty()) {
        MarketMakingEnv env(rc.env, norm, records.front().seed);
        env.set_trace(true);
        play_episode(env, choice.controller->as_fn());
        write_trace_files(opts.out_dir, hash, rc.master_seed, env, "trace_events.csv",
                          "trace_steps.csv");
    }
    return 0;
}

int cmd_grid_lin(const CommonOpts& opts, std::optional<int> episodes_override) {
    RunConfig rc = load_run_config(opts);
    if (episodes_override) rc.lin_grid.episodes = *episodes_override;
    const json command = {{"cmd", "grid-lin"}, {"episodes", rc.lin_grid.episodes}};
    const auto hash = hash_hex(run_hash(rc, command));
    const std::string norm_path = resolve_path(opts.out_dir, rc.paths.norm_stats);
    const NormStats norm = norm_or_neutral(norm_path, false);

    const auto result = grid_search_lin(rc.env, norm, rc.lin_grid.grid(), rc.lin_grid.episodes,
                                        derive_seed(rc.master_seed, seed_purpose::grid));

    auto csv = open_artifact(resolve_path(opts.out_dir, "grid_report.csv"), hash, rc.master_seed);
    csv << "theta0,theta1,mean_return,mean_pnl,std_pnl,sharpe,map\n";
    for (const auto& row : result.report)
        csv << num(row.params.theta0) << ',' << num(row.params.theta1) << ','
            << num(row.mean_return) << ',' << num(row.mean_pnl) << ',' << num(row.std_pnl) << ','
            << num(row.sharpe) << ',' << num(row.map) << "\n";

    json best = {{"theta0", result.best.theta0},
                 {"theta1", result.best.theta1},
                 {"mean_return", result.best_metric},
                 {"config_hash", hash},
                 {"master_seed", rc.master_seed}};
    std::ofstream bf(resolve_path(opts.out_dir, "lin_best.json"), std::ios::trunc);
    bf << best.dump(2) << "\n";
    std::cout << "best LIN: theta0=" << result.best.theta0 << " theta1=" << result.best.theta1
              << " mean return " << result.best_metric << "\n";
    return 0;
}

int cmd_sweep_noise(const CommonOpts& opts, const std::string& controller_spec,
                    std::optional<int> episodes_override, const std::string& lin_params_path) {
    RunConfig rc = load_run_config(opts);
    if (episodes_override) rc.sweeps.episodes = *episodes_override;
    const std::string norm_path = resolve_path(opts.out_dir, rc.paths.norm_stats);
    const bool neural = controller_spec != "sym" && controller_spec != "lin";
    const NormStats norm = norm_or_neutral(norm_path, neural);
    auto choice = make_controller(controller_spec, lin_params_path, rc, norm_path);
    json command = {{"cmd", "sweep-noise"}, {"episodes", rc.sweeps.episodes}};
    command.update(choice.descriptor);
    const auto hash = hash_hex(run_hash(rc, command));

    const auto entries =
        sweep_noise(rc.env, norm, *choice.controller, rc.sweeps.noise_variances,
                    rc.sweeps.episodes, derive_seed(rc.master_seed, seed_purpose::evaluation));

    auto csv = open_artifact(resolve_path(opts.out_dir, "noise_sweep.csv"), hash, rc.master_seed);
    csv << "variance," << kSummaryCsvColumns << "\n";
    for (const auto& e : entries) {
        csv << num(e.variance) << ',';
        write_summary_csv_fields(csv, e.summary);
        csv << "\n";
        std::cout << "variance " << e.variance << ": sharpe " << e.summary.sharpe << ", map "
                  << e.summary.map << "\n";
    }
    return 0;
}

int cmd_sweep_fees(const CommonOpts& opts, const std::string& controller_spec,
                   std::optional<int> episodes_override, const std::string& lin_params_path,
                   bool retrain) {
    RunConfig rc = load_run_config(opts);
    if (episodes_override) rc.sweeps.episodes = *episodes_override;
    const std::string norm_path = resolve_path(opts.out_dir, rc.paths.norm_stats);
    const bool has_neural = !controller_spec.empty();
    const NormStats norm = norm_or_neutral(norm_path, has_neural || retrain);

    SymController sym;
    const LinParams lin_params = read_lin_params(lin_params_path);
    LinController lin(lin_params);
    std::vector<const Controller*> controllers = {&sym, &lin};

    std::unique_ptr<Controller> fixed_neural;
    json command = {{"cmd", "sweep-fees"},
                    {"episodes", rc.sweeps.episodes},
                    {"retrain", retrain},
                    {"theta0", lin_params.theta0},
                    {"theta1", lin_params.theta1}};
    if (has_neural) {
        auto choice = make_controller(controller_spec, lin_params_path, rc, norm_path);
        fixed_neural = std::move(choice.controller);
        controllers.push_back(fixed_neural.get());
        command.update(choice.descriptor);
    }
    const auto hash = hash_hex(run_hash(rc, command));

    RetrainFn retrain_fn;
    if (retrain) {
        // One derived seed for every fee level: common random numbers make the
        // per-fee comparison fee-driven rather than seed-driven.
        retrain_fn = [&](const EnvConfig& fee_cfg) -> std::unique_ptr<Controller> {
            SACConfig sac = rc.sac;
            sac.total_steps = rc.sweeps.retrain_steps;
            SacTrainer trainer(fee_cfg, sac, norm,
                               derive_seed(rc.master_seed, seed_purpose::train_env, 1000));
            auto result = trainer.train();
            return std::make_unique<NeuralController>(result.best_actor,
                                                      fee_cfg.max_offset_ticks);
        };
    }

    const auto entries =
        sweep_fees(rc.env, norm, controllers, rc.sweeps.maker_fees, rc.sweeps.episodes,
                   derive_seed(rc.master_seed, seed_purpose::evaluation), retrain_fn);

    auto csv = open_artifact(resolve_path(opts.out_dir, "fee_sweep.csv"), hash, rc.master_seed);
    csv << "maker_fee,controller," << kSummaryCsvColumns << "\n";
    for (const auto& e : entries) {
        csv << num(e.maker_fee) << ',' << e.controller << ',';
        write_summary_csv_fields(csv, e.summary);
        csv << "\n";
        std::cout << "fee " << e.maker_fee << " " << e.controller << ": sharpe "
                  << e.summary.sharpe << ", mean trades " << e.summary.mean_trades << "\n";
    }
    return 0;
}

int cmd_simulate(const CommonOpts& opts, double horizon, const std::string& controller_spec,
                 const std::string& lin_params_path) {
    RunConfig rc = load_run_config(opts);
    const std::string norm_path = resolve_path(opts.out_dir, rc.paths.norm_stats);

    if (!controller_spec.empty()) {
        const bool neural = controller_spec != "sym" && controller_spec != "lin";
        const NormStats norm = norm_or_neutral(norm_path, neural);
        auto choice = make_controller(controller_spec, lin_params_path, rc, norm_path);
        json command = {{"cmd", "simulate"}, {"horizon", rc.env.horizon}};
        command.update(choice.descriptor);
        const auto hash = hash_hex(run_hash(rc, command));
        MarketMakingEnv env(rc.env, norm, derive_seed(rc.master_seed, seed_purpose::evaluation));
        env.set_trace(true);
        const auto result = play_episode(env, choice.controller->as_fn());
        write_trace_files(opts.out_dir, hash, rc.master_seed, env, "events.csv",
                          "step_trace.csv");
        std::cout << "episode pnl " << result.pnl << ", trades " << result.n_trades << "\n";
        return 0;
    }

    const json command = {{"cmd", "simulate"}, {"horizon", horizon}};
    const auto hash = hash_hex(run_hash(rc, command));
    HawkesState state = make_hawkes_state(rc.env.hawkes);
    BookTop book;
    book.tick = rc.env.tick;
    book.bid = rc.env.p0 - rc.env.init_spread_ticks * rc.env.tick / 2.0;
    book.ask = rc.env.p0 + rc.env.init_spread_ticks * rc.env.tick / 2.0;
    Rng rng(derive_seed(rc.master_seed, seed_purpose::market));
    auto events = open_artifact(resolve_path(opts.out_dir, "events.csv"), hash, rc.master_seed);
    events << "time,etype,jump_ticks,source,bid,ask\n";
    long count = 0;
    for (;;) {
        const auto ev = next_event(rc.env.hawkes, state, rng, horizon);
        if (!ev) break;
        const auto et = static_cast<EventType>(ev->dim_index);
        std::optional<MarkedEvent> applied;
        if (is_aggressive(et)) {
            applied = mark_and_apply(book, et, ev->time, uniform01(rng), rc.env.marks,
                                     rc.env.cancel_trunc, rc.env.round_jumps,
                                     EventSource::market);
        } else {
            (void)uniform01(rng);  // z3 draw, keeps the stream aligned with the env
            applied = MarkedEvent{et, ev->time, 0.0, EventSource::market};
        }
        if (applied) {
            events << num(applied->time) << ',' << event_type_name(applied->etype) << ','
                   << num(applied->jump_ticks) << ",market," << num(book.bid) << ','
                   << num(book.ask) << "\n";
            ++count;
        }
    }
    std::cout << "simulated " << count << " events over " << horizon << " time units\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hawkes-driven limit-order-book market-making laboratory"};
    app.require_subcommand(1);

    CommonOpts opts;
    int calib_steps = 100000;
    std::optional<long> train_steps;
    std::optional<int> episodes;
    std::string controller = "sym";
    std::string sweep_controller;
    std::string lin_params_path;
    bool trace = false;
    bool retrain = false;
    double sim_horizon = 100.0;
    std::string sim_controller;

    auto* calibrate =
        app.add_subcommand("calibrate-norm", "estimate feature normalization statistics");
    add_common(calibrate, opts);
    calibrate->add_option("--steps", calib_steps, "random-policy steps");

    auto* train = app.add_subcommand("train", "train the SAC controller");
    add_common(train, opts);
    train->add_option("--steps", train_steps, "total environment steps");

    auto* backtest = app.add_subcommand("backtest", "Monte Carlo evaluation of a controller");
    add_common(backtest, opts);
    backtest->add_option("--controller", controller, "sym | lin | <checkpoint path>");
    backtest->add_option("--episodes", episodes, "number of episodes");
    backtest->add_option("--lin-params", lin_params_path, "JSON with theta0/theta1 for lin");
    backtest->add_flag("--trace", trace, "write event/step traces for the first episode");

    auto* grid = app.add_subcommand("grid-lin", "grid search over LIN parameters");
    add_common(grid, opts);
    grid->add_option("--episodes", episodes, "episodes per candidate");

    auto* noise = app.add_subcommand("sweep-noise", "intensity-noise sensitivity sweep");
    add_common(noise, opts);
    noise->add_option("--controller", controller, "sym | lin | <checkpoint path>");
    noise->add_option("--episodes", episodes, "episodes per noise level");
    noise->add_option("--lin-params", lin_params_path, "JSON with theta0/theta1 for lin");

    auto* fees = app.add_subcommand("sweep-fees", "maker-fee sensitivity sweep");
    add_common(fees, opts);
    fees->add_option("--controller", sweep_controller, "fixed checkpoint to evaluate");
    fees->add_option("--episodes", episodes, "episodes per fee level");
    fees->add_option("--lin-params", lin_params_path, "JSON with theta0/theta1 for lin");
    fees->add_flag("--retrain", retrain, "retrain the neural controller per fee level");

    auto* simulate = app.add_subcommand("simulate", "raw market simulation (no agent)");
    add_common(simulate, opts);
    simulate->add_option("--steps", sim_horizon, "time horizon");
    simulate->add_option("--controller", sim_controller,
                         "run one traced episode under a controller instead");
    simulate->add_option("--lin-params", lin_params_path, "JSON with theta0/theta1 for lin");

    CLI11_PARSE(app, argc, argv);

    try {
        if (calibrate->parsed()) return cmd_calibrate(opts, calib_steps);
        if (train->parsed()) return cmd_train(opts, train_steps);
        if (backtest->parsed())
            return cmd_backtest(opts, controller, episodes, lin_params_path, trace);
        if (grid->parsed()) return cmd_grid_lin(opts, episodes);
        if (noise->parsed()) return cmd_sweep_noise(opts, controller, episodes, lin_params_path);
        if (fees->parsed())
            return cmd_sweep_fees(opts, sweep_controller, episodes, lin_params_path, retrain);
        if (simulate->parsed())
            return cmd_simulate(opts, sim_horizon, sim_controller, lin_params_path);
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
