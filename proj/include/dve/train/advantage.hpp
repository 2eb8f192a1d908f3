#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dve/train/rollout.hpp"

namespace dve::train {

/// One contiguous trajectory segment. done[t] ends an episode after step t;
/// truncated[t] marks an end caused by the horizon, which bootstraps from
/// next_value[t]. The final step of a segment that is not done also
/// bootstraps from next_value.
struct Segment {
    std::span<const double> reward;
    std::span<const double> value;
    std::span<const std::uint8_t> done;
    std::span<const std::uint8_t> truncated;
    std::span<const double> next_value;
};

/// GAE(lambda) advantages for one segment:
/// A_t = sum_k (gamma lambda)^k delta_{t+k}, delta_t = r_t + gamma V_{t+1} - V_t.
std::vector<double> gae(const Segment& seg, double gamma, double lambda);

/// Fills returns, advantages and advantages_norm (mean 0, std 1, eps 1e-8).
/// Rejects gamma or lambda outside [0, 1].
void compute_returns_advantages(RolloutBatch& batch, double gamma, double lambda);

}  // namespace dve::train
