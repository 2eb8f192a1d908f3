#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dve/envs/level.hpp"
#include "dve/models/network.hpp"

namespace dve::train {

/// An episode that ended inside a rollout segment.
struct EpisodeRecord {
    std::size_t worker = 0;
    std::size_t level_id = 0;
    double total_reward = 0.0;
    double discounted_return = 0.0;
    std::size_t length = 0;
    bool success = false;
    bool truncated = false;
};

/// Flat, worker-major trajectory storage: step t of worker w lives at index
/// w * steps_per_worker + t. Per-step matrices are row-major.
struct RolloutBatch {
    std::size_t n_workers = 0;
    std::size_t steps_per_worker = 0;
    std::size_t obs_dim = 0;
    std::size_t n_actions = 0;
    std::size_t hidden = 0;
    std::size_t n_basis = 0;  // 0 unless the critic is dynamic

    std::vector<double> obs;            // [N x obs_dim]
    std::vector<std::size_t> action;    // [N]
    std::vector<double> log_prob_old;   // [N], of the taken action
    std::vector<double> old_log_probs;  // [N x n_actions], full behaviour distribution
    std::vector<double> reward;         // [N]
    std::vector<double> value_pred;     // [N]
    std::vector<std::uint8_t> done;     // [N], episode ended after this step
    std::vector<std::uint8_t> truncated;      // [N], ended by the horizon only
    std::vector<std::uint8_t> episode_start;  // [N], recurrent state was reset before this step
    std::vector<double> next_value;     // [N], bootstrap value; set at truncation and segment ends
    std::vector<std::size_t> level_id;  // [N]
    std::vector<double> state_hidden;   // [N x hidden], recurrent state before the step
    std::vector<double> state_cell;     // [N x hidden]
    std::vector<double> alpha;          // [N x n_basis]

    // Filled by compute_returns_advantages.
    std::vector<double> returns;
    std::vector<double> advantages;       // returns - value_pred
    std::vector<double> advantages_norm;  // batch-normalized copy

    std::vector<EpisodeRecord> episodes;

    std::size_t size() const noexcept { return n_workers * steps_per_worker; }
    std::size_t index(std::size_t worker, std::size_t t) const noexcept { return worker * steps_per_worker + t; }
    std::span<const double> obs_row(std::size_t i) const { return {obs.data() + i * obs_dim, obs_dim}; }
    std::span<const double> log_probs_row(std::size_t i) const {
        return {old_log_probs.data() + i * n_actions, n_actions};
    }
    std::span<const double> alpha_row(std::size_t i) const { return {alpha.data() + i * n_basis, n_basis}; }
};

struct RolloutConfig {
    std::size_t n_workers = 4;
    std::size_t steps_per_worker = 256;
    std::size_t horizon = 100;

    friend bool operator==(const RolloutConfig&, const RolloutConfig&) = default;
};

/// Runs every worker on its own thread against a read-only parameter
/// snapshot. Each worker starts fresh episodes on levels drawn uniformly from
/// `levels` using its own seed, so the batch is a pure function of
/// (net, levels, cfg, worker_seeds). Segments are merged in worker order.
RolloutBatch collect_rollouts(const models::ActorCritic& net, std::span<const envs::LevelHandle> levels,
                              const RolloutConfig& cfg, std::span<const std::uint64_t> worker_seeds);

}  // namespace dve::train
