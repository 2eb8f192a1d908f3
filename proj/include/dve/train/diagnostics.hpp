#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dve/models/network.hpp"
#include "dve/train/rollout.hpp"

namespace dve::train {

/// KL(p || q) = sum_a exp(log_p) (log_p - log_q) for two log-distributions.
double kl_divergence(std::span<const double> log_p, std::span<const double> log_q);

/// Mean over batch steps of KL(pi_old || pi_new), with pi_old read from the
/// stored behaviour distributions and pi_new replayed under `net`.
double kl_old_new(const RolloutBatch& batch, const models::ActorCritic& net, std::size_t bptt_len = 16);

/// Mean of squared unnormalized advantages.
double sample_variance_psi2(const RolloutBatch& batch);

/// Score function d log pi(a_i | s_i, tau) / d(trunk, actor) for batch step
/// i, differentiating one recurrent step from the stored state snapshot.
/// Flattened in parameter order over the policy parameters.
std::vector<double> score_gradient(const models::ActorCritic& net, const RolloutBatch& batch, std::size_t i);

/// |score_gradient(i)|^2 for each listed step, computed in one batched pass.
std::vector<double> score_norms_sq(const RolloutBatch& batch, const models::ActorCritic& net,
                                   std::span<const std::size_t> rows);

/// Mean squared score-function norm over `samples` steps drawn without
/// replacement from `seed` (all steps when the batch is smaller).
double kappa_estimate(const RolloutBatch& batch, const models::ActorCritic& net, std::size_t samples, std::uint64_t seed);

/// Mean confusion of the recorded posteriors; NaN without a dynamic head.
double mean_confusion(const RolloutBatch& batch);

}  // namespace dve::train
