#include "mmlab/strategies.hpp"

#include <cmath>
#include <stdexcept>

#include "mmlab/parallel.hpp"
#include "mmlab/stats.hpp"

namespace mmlab {

std::pair<double, double> LinController::act(const ObsView& obs) const {
    const double inv = obs.inventory;
    const double off_b = std::round(p_.theta0 + p_.theta1 * inv);
    const double off_a = std::round(p_.theta0 - p_.theta1 * inv);
    return {off_a, off_b};
}

GridSearchResult grid_search_lin(const EnvConfig& cfg, const NormStats& norm,
                                 const std::vector<LinParams>& grid, int n_episodes,
                                 std::uint64_t seed_base) {
    if (grid.empty()) throw std::invalid_argument("grid_search_lin: empty grid");
    if (n_episodes < 1) throw std::invalid_argument("grid_search_lin: need n_episodes >= 1");

    GridSearchResult result;
    result.report.resize(grid.size());
    bool have_best = false;

    for (std::size_t c = 0; c < grid.size(); ++c) {
        const LinController controller(grid[c]);
        std::vector<EpisodeResult> episodes(static_cast<std::size_t>(n_episodes));
        parallel_for(n_episodes, [&](int i) {
            MarketMakingEnv env(cfg, norm, seed_base + static_cast<std::uint64_t>(i));
            episodes[static_cast<std::size_t>(i)] = play_episode(env, controller.as_fn());
        });

        std::vector<double> returns, pnls;
        returns.reserve(episodes.size());
        pnls.reserve(episodes.size());
        double map_sum = 0.0;
        for (const auto& e : episodes) {
            returns.push_back(e.episode_return);
            pnls.push_back(e.pnl);
            map_sum += e.map;
        }

        GridSearchRow row;
        row.params = grid[c];
        row.mean_return = stats::mean(returns);
        row.mean_pnl = stats::mean(pnls);
        row.std_pnl = pnls.size() > 1 ? stats::sample_stddev(pnls) : 0.0;
        row.sharpe = row.std_pnl > 0.0 ? row.mean_pnl / row.std_pnl : 0.0;
        row.map = map_sum / static_cast<double>(episodes.size());
        result.report[c] = row;

        const double metric = row.mean_return;
        const bool better =
            !have_best || metric > result.best_metric ||
            (metric == result.best_metric &&
             (grid[c].theta0 < result.best.theta0 ||
              (grid[c].theta0 == result.best.theta0 && grid[c].theta1 < result.best.theta1)));
        if (better) {
            have_best = true;
            result.best = grid[c];
            result.best_metric = metric;
        }
    }
    return result;
}

}  // namespace mmlab
