#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dve/analysis/value_matrix.hpp"
#include "dve/diff/lstm.hpp"
#include "dve/envs/level.hpp"
#include "dve/models/network.hpp"

namespace dve::analysis {

/// A state visited by the frozen policy together with the recurrent state it
/// was reached with. `features` is the trunk output at that step.
struct ProbePoint {
    std::size_t level_index = 0;
    std::size_t state = 0;
    diff::LstmState lstm;  // state before the step
    std::vector<double> features;
    double value_pred = 0.0;  // critic output at this step
};

/// One uniformly chosen step from each of `count` sampled episodes.
std::vector<ProbePoint> sample_probes(const models::ActorCritic& net, const std::vector<envs::LevelHandle>& levels,
                                      std::size_t count, std::uint64_t seed, std::size_t horizon = 100);

struct FineTuneConfig {
    double lr = 1e-2;
    std::size_t max_steps = 500;
    std::size_t plateau_window = 50;
    double plateau_rel = 1e-5;
    std::size_t episodes = 32;      // Monte Carlo episodes per level
    std::size_t horizon = 500;      // episode cap for the return targets
};

struct TrueValueResult {
    ValueMatrix matrix;  // rows for the levels that fine-tuned cleanly
    std::vector<std::size_t> excluded;  // level indices dropped for a non-finite loss
    std::vector<double> final_loss;     // per input level; NaN when excluded
    std::vector<diff::ParamStore> tuned;  // per kept level when requested
};

/// Freezes the trunk and actor, clones the critic branch per level, fits it
/// to Monte Carlo returns of the frozen policy on that level, and evaluates
/// every clone on the shared probe features.
TrueValueResult estimate_true_values(const models::ActorCritic& base, const std::vector<envs::LevelHandle>& levels,
                                     const std::vector<ProbePoint>& probes, const FineTuneConfig& cfg,
                                     std::uint64_t seed, const std::string& policy_tag, bool keep_tuned = false);

/// Per-level Markov policy over the level's own states.
using PolicyRule = std::function<envs::TabularPolicy(const envs::LevelHandle&)>;

/// Bellman-exact values at the given probe states under a per-level policy
/// rule (one common rule across levels).
ValueMatrix exact_values(const std::vector<envs::LevelHandle>& levels, const PolicyRule& rule,
                         const std::vector<std::size_t>& states, const std::string& policy_tag);

/// The network's action distribution at each state with a zero recurrent
/// state. This is the Markov policy used by the exact tabular variant.
envs::TabularPolicy memoryless_policy(const models::ActorCritic& net, const envs::LevelHandle& level);

struct PredictionError {
    double mean_sq_error = 0.0;  // noise-corrected E[(V - Vhat)^2]
    double raw_mean_sq = 0.0;    // before subtracting the Monte Carlo variance
    double mean_noise = 0.0;     // mean s^2 / K
    std::size_t probes = 0;
};

/// E[(V(s,M) - Vhat)^2] over probe steps sampled under the recurrent policy.
/// V at each probe is the mean discounted return of `continuations`
/// rollouts that carry the recurrent state forward, capped at `cap` steps;
/// the squared error is debiased by the sample variance over K.
PredictionError prediction_error_mc(const models::ActorCritic& net, const std::vector<envs::LevelHandle>& levels,
                                    std::size_t n_probes, std::size_t continuations, std::uint64_t seed,
                                    std::size_t horizon = 100, std::size_t cap = 1000);

}  // namespace dve::analysis
