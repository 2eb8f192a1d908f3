#include "dve/envs/episode.hpp"

#include <stdexcept>

namespace dve::envs {

EpisodeTrace run_episode(const LevelHandle& level, const ActionFn& act, Rng& rng, std::size_t horizon) {
    if (horizon == 0) throw std::invalid_argument("run_episode: horizon must be >= 1");
    EpisodeTrace trace;
    trace.level = level;
    std::size_t state = level.sample_start(rng);
    double discount = 1.0;
    while (!level.spec.is_terminal(state) && trace.length < horizon) {
        const auto obs = level.observe(state);
        const std::size_t action = act(obs, rng);
        StepResult r = step(level, state, action, rng);
        state = r.next_state;
        ++trace.length;
        if (!r.transition.done && trace.length == horizon) {
            r.transition.done = true;
            r.transition.truncated = true;
        }
        trace.total_reward += r.transition.reward;
        trace.discounted_return += discount * r.transition.reward;
        discount *= level.spec.gamma;
        trace.transitions.push_back(std::move(r.transition));
    }
    trace.reached_goal = level.family == Family::gapworld && level.is_goal(state);
    return trace;
}

EpisodeOutcome outcome(const EpisodeTrace& trace) {
    EpisodeOutcome o;
    o.success = trace.reached_goal;
    o.path_len = trace.length;
    o.optimal_len = trace.level.family == Family::gapworld ? trace.level.optimal_path_length() : 1;
    o.total_reward = trace.total_reward;
    return o;
}

}  // namespace dve::envs
