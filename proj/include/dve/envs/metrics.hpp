#pragma once

#include <cstddef>
#include <span>

namespace dve::envs {

struct EpisodeOutcome {
    bool success = false;
    std::size_t path_len = 0;
    std::size_t optimal_len = 1;
    double total_reward = 0.0;
};

struct EvalMetrics {
    double spl = 0.0;
    double success_rate = 0.0;
    double mean_total_reward = 0.0;
    std::size_t episodes = 0;
};

/// Success weighted by path length, success rate and mean reward over a
/// non-empty episode list.
EvalMetrics spl(std::span<const EpisodeOutcome> episodes);

}  // namespace dve::envs
