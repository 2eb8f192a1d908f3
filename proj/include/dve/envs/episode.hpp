#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dve/envs/level.hpp"
#include "dve/envs/metrics.hpp"

namespace dve::envs {

/// One played episode. total_reward is the undiscounted sum and
/// discounted_return uses the level's gamma.
struct EpisodeTrace {
    LevelHandle level;
    std::vector<Transition> transitions;
    double total_reward = 0.0;
    double discounted_return = 0.0;
    std::size_t length = 0;
    bool reached_goal = false;
};

/// Chooses an action for the current observation. A recurrent chooser keeps
/// its own state and is reset by the caller between episodes.
using ActionFn = std::function<std::size_t(std::span<const double> obs, Rng& rng)>;

/// Plays from a sampled start state until absorption or `horizon` steps,
/// whichever comes first; the final transition is flagged truncated in the
/// second case.
EpisodeTrace run_episode(const LevelHandle& level, const ActionFn& act, Rng& rng, std::size_t horizon);

/// Success/path summary for SPL. Gapworld success means reaching the goal;
/// tabular levels have no goal and never count as successes.
EpisodeOutcome outcome(const EpisodeTrace& trace);

}  // namespace dve::envs
