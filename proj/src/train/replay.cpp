#include "dve/train/replay.hpp"

#include <stdexcept>

namespace dve::train {

using diff::Shape;
using diff::Tensor;

std::size_t chunk_length(const RolloutBatch& batch, std::size_t bptt_len) {
    if (bptt_len == 0) throw std::invalid_argument("bptt length must be >= 1");
    const std::size_t len = std::min(bptt_len, batch.steps_per_worker);
    if (len == 0 || batch.steps_per_worker % len != 0) {
        throw std::invalid_argument("bptt length " + std::to_string(len) + " does not divide steps_per_worker " +
                                    std::to_string(batch.steps_per_worker));
    }
    return len;
}

std::vector<std::size_t> chunk_starts(const RolloutBatch& batch, std::size_t bptt_len) {
    const std::size_t len = chunk_length(batch, bptt_len);
    std::vector<std::size_t> out;
    for (std::size_t w = 0; w < batch.n_workers; ++w)
        for (std::size_t t = 0; t < batch.steps_per_worker; t += len) out.push_back(batch.index(w, t));
    return out;
}

std::vector<ReplayStep> replay_chunks(models::Binder& bind, const models::NetConfig& cfg, const RolloutBatch& batch,
                                      std::span<const std::size_t> starts, std::size_t len) {
    if (starts.empty()) throw std::invalid_argument("replay_chunks: no chunks");
    diff::Tape& tape = bind.tape();
    const std::size_t B = starts.size(), H = batch.hidden, D = batch.obs_dim;
    if (H != cfg.lstm_hidden || D != cfg.obs_dim) throw std::invalid_argument("replay_chunks: batch does not match the network");

    Tensor h0(Shape{B, H}), c0(Shape{B, H});
    for (std::size_t r = 0; r < B; ++r) {
        for (std::size_t j = 0; j < H; ++j) {
            h0(r, j) = batch.state_hidden[starts[r] * H + j];
            c0(r, j) = batch.state_cell[starts[r] * H + j];
        }
    }
    diff::LstmVars state{tape.constant(std::move(h0)), tape.constant(std::move(c0))};

    std::vector<ReplayStep> steps;
    steps.reserve(len);
    for (std::size_t t = 0; t < len; ++t) {
        std::vector<std::size_t> rows(B);
        for (std::size_t r = 0; r < B; ++r) rows[r] = starts[r] + t;

        if (t > 0) {
            Tensor mask(Shape{B, H}, 1.0);
            bool any = false;
            for (std::size_t r = 0; r < B; ++r) {
                if (!batch.episode_start[rows[r]]) continue;
                any = true;
                for (std::size_t j = 0; j < H; ++j) mask(r, j) = 0.0;
            }
            if (any) {
                diff::Var m = tape.constant(std::move(mask));
                state = {diff::mul(state.hidden, m), diff::mul(state.cell, m)};
            }
        }
        Tensor obs(Shape{B, D});
        for (std::size_t r = 0; r < B; ++r)
            for (std::size_t j = 0; j < D; ++j) obs(r, j) = batch.obs[rows[r] * D + j];

        state = models::encode(bind, tape.constant(std::move(obs)), state);
        steps.push_back({models::actor_forward(bind, state.hidden), models::critic_forward(bind, cfg, state.hidden),
                         std::move(rows)});
    }
    return steps;
}

}  // namespace dve::train
