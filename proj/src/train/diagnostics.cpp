#include "dve/train/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "dve/models/cluster_metrics.hpp"
#include "dve/train/replay.hpp"

namespace dve::train {

double kl_divergence(std::span<const double> log_p, std::span<const double> log_q) {
    if (log_p.size() != log_q.size() || log_p.empty()) throw std::invalid_argument("kl_divergence: size mismatch");
    double kl = 0.0;
    for (std::size_t a = 0; a < log_p.size(); ++a) {
        const double p = std::exp(log_p[a]);
        if (p > 0.0) kl += p * (log_p[a] - log_q[a]);
    }
    return kl;
}

double kl_old_new(const RolloutBatch& batch, const models::ActorCritic& net, std::size_t bptt_len) {
    const std::size_t len = chunk_length(batch, bptt_len);
    const auto chunks = chunk_starts(batch, bptt_len);
    diff::Tape tape(false);
    models::Binder bind(tape, net.params());
    const auto steps = replay_chunks(bind, net.config(), batch, chunks, len);
    const std::size_t A = batch.n_actions;
    double total = 0.0;
    for (const auto& st : steps) {
        auto lp_new = st.policy.log_probs.value();
        for (std::size_t r = 0; r < st.rows.size(); ++r) {
            total += kl_divergence(batch.log_probs_row(st.rows[r]), lp_new.subspan(r * A, A));
        }
    }
    return total / static_cast<double>(batch.size());
}

double sample_variance_psi2(const RolloutBatch& batch) {
    if (batch.advantages.empty()) throw std::invalid_argument("sample_variance_psi2: batch has no advantages");
    double s = 0.0;
    for (double a : batch.advantages) s += a * a;
    return s / static_cast<double>(batch.advantages.size());
}

std::vector<double> score_gradient(const models::ActorCritic& net, const RolloutBatch& batch, std::size_t i) {
    if (i >= batch.size()) throw std::out_of_range("score_gradient: step index out of range");
    const std::size_t H = batch.hidden;
    const auto names = net.policy_parameter_names();
    // Gradients land in a private copy so the caller's network stays untouched.
    diff::ParamStore params = net.params();
    params.zero_grad();
    diff::Tape tape;
    models::Binder bind(tape, params, std::set<std::string>(names.begin(), names.end()));
    const diff::Shape row{1, H};
    diff::LstmVars state{tape.constant(row, {batch.state_hidden.data() + i * H, H}),
                         tape.constant(row, {batch.state_cell.data() + i * H, H})};
    auto next = models::encode(bind, tape.constant(diff::Shape{1, batch.obs_dim}, batch.obs_row(i)), state);
    auto pol = models::actor_forward(bind, next.hidden);
    const std::size_t a = batch.action[i];
    tape.backward(diff::pick(pol.log_probs, std::span<const std::size_t>(&a, 1)));
    std::vector<double> g;
    for (const auto& n : names) {
        auto d = params.get(n).grad.data();
        g.insert(g.end(), d.begin(), d.end());
    }
    return g;
}

std::vector<double> score_norms_sq(const RolloutBatch& batch, const models::ActorCritic& net,
                                   std::span<const std::size_t> rows) {
    const std::size_t B = rows.size(), H = batch.hidden, D = batch.obs_dim;
    if (B == 0) return {};
    for (auto i : rows)
        if (i >= batch.size()) throw std::out_of_range("score_norms_sq: step index out of range");
    diff::Tensor h(diff::Shape{B, H}), c(diff::Shape{B, H}), x(diff::Shape{B, D});
    std::vector<std::size_t> actions(B);
    for (std::size_t r = 0; r < B; ++r) {
        for (std::size_t j = 0; j < H; ++j) {
            h(r, j) = batch.state_hidden[rows[r] * H + j];
            c(r, j) = batch.state_cell[rows[r] * H + j];
        }
        for (std::size_t j = 0; j < D; ++j) x(r, j) = batch.obs[rows[r] * D + j];
        actions[r] = batch.action[rows[r]];
    }
    // Parameters stay frozen; the observation leaf carries the gradient so
    // every intermediate node keeps its adjoint.
    diff::Parameter obs{"obs", std::move(x), diff::Tensor(diff::Shape{B, D})};
    diff::Tape tape;
    models::Binder bind(tape, net.params());
    models::EncodeTrace tr;
    diff::Var hv = tape.constant(h), cv = tape.constant(c);
    auto next = models::encode(bind, tape.parameter(obs), {hv, cv}, &tr);
    auto pol = models::actor_forward(bind, next.hidden);
    tape.backward(diff::sum(diff::pick(pol.log_probs, actions)));

    // Rows are independent, so row r of each adjoint is sample r's own
    // gradient. A rank-1 weight gradient x^T g has squared norm |x|^2 |g|^2.
    auto row_sq = [](std::span<const double> m, std::size_t r, std::size_t cols) {
        double s = 0.0;
        for (std::size_t j = 0; j < cols; ++j) s += m[r * cols + j] * m[r * cols + j];
        return s;
    };
    const std::size_t E = tr.encoder_out.shape().cols, A = batch.n_actions;
    const auto& xs = obs.value.storage();
    auto g_pre = tr.encoder_pre.grad(), g_gates = tr.gates.grad(), g_logits = pol.logits.grad();
    auto e = tr.encoder_out.value(), f = next.hidden.value();
    auto hs = h.storage();
    std::vector<double> out(B);
    for (std::size_t r = 0; r < B; ++r) {
        const double gp = row_sq(g_pre, r, E), gg = row_sq(g_gates, r, 4 * H), gl = row_sq(g_logits, r, A);
        const double in_enc = row_sq(xs, r, D);
        const double in_lstm = row_sq(e, r, E) + row_sq(hs, r, H);
        const double in_actor = row_sq(f, r, H);
        out[r] = gp * (in_enc + 1.0) + gg * (in_lstm + 1.0) + gl * (in_actor + 1.0);
    }
    return out;
}

double kappa_estimate(const RolloutBatch& batch, const models::ActorCritic& net, std::size_t samples, std::uint64_t seed) {
    const std::size_t N = batch.size();
    if (N == 0) throw std::invalid_argument("kappa_estimate: empty batch");
    std::vector<std::size_t> idx(N);
    std::iota(idx.begin(), idx.end(), 0);
    const std::size_t k = samples == 0 ? N : std::min(samples, N);
    Rng rng(seed);
    for (std::size_t j = 0; j < k; ++j) std::swap(idx[j], idx[j + rng.uniform_int(N - j)]);
    idx.resize(k);
    double total = 0.0;
    for (double v : score_norms_sq(batch, net, idx)) total += v;
    return total / static_cast<double>(k);
}

double mean_confusion(const RolloutBatch& batch) {
    if (batch.n_basis == 0) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) total += models::confusion(batch.alpha_row(i));
    return total / static_cast<double>(batch.size());
}

}  // namespace dve::train
