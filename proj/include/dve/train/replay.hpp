#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dve/models/network.hpp"
#include "dve/train/rollout.hpp"

namespace dve::train {

/// Start indices of the fixed-length BPTT chunks that tile every worker
/// segment. The chunk length is min(bptt_len, steps_per_worker) and must
/// divide steps_per_worker.
std::size_t chunk_length(const RolloutBatch& batch, std::size_t bptt_len);
std::vector<std::size_t> chunk_starts(const RolloutBatch& batch, std::size_t bptt_len);

/// Network outputs at one time offset; row r belongs to batch step rows[r].
struct ReplayStep {
    models::PolicyVars policy;
    models::CriticVars critic;
    std::vector<std::size_t> rows;
};

/// Re-runs the recurrent network over the given chunks, batched across
/// chunks. Each chunk starts from its stored recurrent snapshot; the state is
/// zeroed wherever an episode starts inside the chunk.
std::vector<ReplayStep> replay_chunks(models::Binder& bind, const models::NetConfig& cfg, const RolloutBatch& batch,
                                      std::span<const std::size_t> starts, std::size_t len);

}  // namespace dve::train
