#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dve/diff/adam.hpp"
#include "dve/envs/level.hpp"
#include "dve/envs/metrics.hpp"
#include "dve/models/checkpoint.hpp"
#include "dve/models/network.hpp"
#include "dve/train/rollout.hpp"
#include "dve/train/update.hpp"

namespace dve::train {

struct TrainConfig {
    envs::Family family = envs::Family::gapworld;
    std::size_t n_levels = 50;
    std::uint64_t level_seed = 1000;  // levels use seeds level_seed, level_seed + 1, ...
    Algo algo = Algo::ppo;
    models::HeadKind head = models::HeadKind::baseline;
    std::size_t n_basis = 4;
    std::size_t n_control = 8;
    std::size_t encoder_hidden = 64;
    std::size_t lstm_hidden = 64;
    RolloutConfig rollout;
    UpdateConfig update;
    double gamma = 0.99;
    double lambda = 0.95;
    std::int64_t total_steps = 200000;
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t steps_per_update() const { return rollout.n_workers * rollout.steps_per_worker; }
    std::int64_t total_updates() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

std::vector<envs::LevelHandle> make_levels(const TrainConfig& cfg);
models::NetConfig net_config(const TrainConfig& cfg, const envs::LevelHandle& level);

/// One metrics row. Column order of the CSV is fixed:
/// step, mean_episode_reward, policy_loss, value_loss, entropy, kl_old_new,
/// sample_variance_psi2, kappa_estimate, clip_fraction, mean_confusion.
struct UpdateRecord {
    std::int64_t update = 0;
    std::int64_t step = 0;  // environment steps consumed so far
    double mean_episode_reward = 0.0;  // NaN if no episode ended in the rollout
    std::size_t episodes = 0;
    UpdateStats stats;
    double mean_confusion = 0.0;  // NaN without a dynamic head
};

std::string metrics_header();
std::string metrics_row(const UpdateRecord& r);

struct EvalReport {
    envs::EvalMetrics metrics;
    std::vector<envs::EpisodeOutcome> episodes;
};

/// Episode e plays level e mod |levels| with its own stream derived from
/// `seed`. Greedy mode takes the arg-max action.
EvalReport evaluate_policy(const models::ActorCritic& net, const std::vector<envs::LevelHandle>& levels,
                           std::size_t episodes, std::uint64_t seed, bool greedy, std::size_t horizon);

/// Synchronous rollout/update loop. Every random stream is derived from the
/// master seed and the update index, so the state needed to resume exactly
/// is parameters, optimizer moments and counters.
class Trainer {
public:
    explicit Trainer(TrainConfig cfg);
    /// Resumes from a checkpoint written by this trainer's configuration.
    Trainer(TrainConfig cfg, const models::Checkpoint& ck);

    bool finished() const { return update_ >= cfg_.total_updates(); }
    UpdateRecord step();

    models::Checkpoint checkpoint() const;

    const TrainConfig& config() const noexcept { return cfg_; }
    const models::ActorCritic& net() const noexcept { return net_; }
    models::ActorCritic& net() noexcept { return net_; }
    const std::vector<envs::LevelHandle>& levels() const noexcept { return levels_; }
    std::int64_t update_index() const noexcept { return update_; }
    std::int64_t env_steps() const noexcept { return env_steps_; }

private:
    TrainConfig cfg_;
    std::vector<envs::LevelHandle> levels_;
    models::ActorCritic net_;
    diff::Adam adam_;
    std::int64_t update_ = 0;
    std::int64_t env_steps_ = 0;
};

}  // namespace dve::train
