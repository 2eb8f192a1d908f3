#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dve/diff/adam.hpp"
#include "dve/models/network.hpp"
#include "dve/train/rollout.hpp"

namespace dve::train {

enum class Algo { ppo, a2c };

const char* algo_name(Algo a) noexcept;
Algo parse_algo(const std::string& name);

struct UpdateConfig {
    double clip_eps = 0.2;
    std::size_t epochs = 3;
    std::size_t n_minibatches = 8;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    double lr = 5e-4;
    double max_grad_norm = 0.5;  // 0 disables clipping
    std::size_t bptt_len = 16;
    bool normalize_advantages = true;
    std::size_t kappa_samples = 64;

    void validate() const;

    friend bool operator==(const UpdateConfig&, const UpdateConfig&) = default;
};

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double kl_old_new = 0.0;
    double sample_variance_psi2 = 0.0;
    double kappa_estimate = 0.0;
    double clip_fraction = 0.0;
    double grad_norm = 0.0;  // pre-clipping, mean over the final epoch
    bool aborted = false;
    std::string abort_reason;
};

/// Clipped-surrogate PPO with BPTT chunks. Minibatches are groups of chunks
/// shuffled per epoch from `seed`; losses, entropy and clip fraction are
/// averaged over the final epoch. kappa is measured on the pre-update
/// parameters, KL after the update. A non-finite loss restores the
/// parameters and optimizer to their pre-update values and returns with
/// aborted set.
UpdateStats ppo_update(models::ActorCritic& net, diff::Adam& adam, const RolloutBatch& batch, const UpdateConfig& cfg,
                       std::uint64_t seed);

/// Synchronous advantage actor-critic: one gradient step on
/// -mean(log pi(a|s) A) + value and entropy terms over the whole batch.
UpdateStats a2c_update(models::ActorCritic& net, diff::Adam& adam, const RolloutBatch& batch, const UpdateConfig& cfg,
                       std::uint64_t seed);

/// Flat gradient of the chosen algorithm's loss over the given chunks at the
/// current parameters, without touching the optimizer. Leaves grads zeroed.
std::vector<double> loss_gradient(models::ActorCritic& net, const RolloutBatch& batch, const UpdateConfig& cfg, Algo algo,
                                  std::span<const std::size_t> chunks);

}  // namespace dve::train
