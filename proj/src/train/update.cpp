#include "dve/train/update.hpp"

#include <cmath>
#include <stdexcept>

#include "dve/train/diagnostics.hpp"
#include "dve/train/replay.hpp"

namespace dve::train {

using diff::Shape;
using diff::Tape;
using diff::Tensor;
using diff::Var;

const char* algo_name(Algo a) noexcept { return a == Algo::ppo ? "ppo" : "a2c"; }

Algo parse_algo(const std::string& name) {
    if (name == "ppo") return Algo::ppo;
    if (name == "a2c") return Algo::a2c;
    throw std::invalid_argument("unknown algorithm '" + name + "'");
}

void UpdateConfig::validate() const {
    if (!(clip_eps > 0.0)) throw std::invalid_argument("clip_eps must be > 0");
    if (epochs == 0 || n_minibatches == 0 || bptt_len == 0) {
        throw std::invalid_argument("epochs, n_minibatches and bptt_len must be >= 1");
    }
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be finite and >= 0");
    if (!(max_grad_norm >= 0.0)) throw std::invalid_argument("max_grad_norm must be >= 0");
}

namespace {

struct LossParts {
    Var total;
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    std::size_t clipped = 0;
    std::size_t rows = 0;
};

LossParts build_loss(Tape& tape, models::Binder& bind, const models::NetConfig& nc, const RolloutBatch& batch,
                     const UpdateConfig& cfg, Algo algo, std::span<const std::size_t> chunks, std::size_t len) {
    const auto steps = replay_chunks(bind, nc, batch, chunks, len);
    const std::size_t B = chunks.size();
    const std::size_t n = B * len;

    // Advantage normalization over exactly the rows of this loss.
    double mean = 0.0, sd = 1.0;
    if (cfg.normalize_advantages) {
        double s = 0.0, s2 = 0.0;
        for (const auto& st : steps)
            for (auto i : st.rows) s += batch.advantages[i];
        mean = s / static_cast<double>(n);
        for (const auto& st : steps)
            for (auto i : st.rows) s2 += (batch.advantages[i] - mean) * (batch.advantages[i] - mean);
        sd = std::sqrt(s2 / static_cast<double>(n)) + 1e-8;
    }

    LossParts out;
    out.rows = n;
    Var objective, neg_entropy, sq_err;
    auto accumulate = [](Var& acc, Var term) { acc = acc.valid() ? diff::add(acc, term) : term; };
    for (const auto& st : steps) {
        Tensor adv(Shape{B, 1}), ret(Shape{B, 1}), old(Shape{B, 1});
        std::vector<std::size_t> actions(B);
        for (std::size_t r = 0; r < B; ++r) {
            const std::size_t i = st.rows[r];
            adv(r, 0) = (batch.advantages[i] - mean) / sd;
            ret(r, 0) = batch.returns[i];
            old(r, 0) = batch.log_prob_old[i];
            actions[r] = batch.action[i];
        }
        Var adv_v = tape.constant(std::move(adv));
        Var lp = diff::pick(st.policy.log_probs, actions);
        if (algo == Algo::ppo) {
            Var ratio = diff::exp(diff::sub(lp, tape.constant(std::move(old))));
            for (double r : ratio.value())
                if (std::abs(r - 1.0) > cfg.clip_eps) ++out.clipped;
            Var s1 = diff::mul(ratio, adv_v);
            Var s2 = diff::mul(diff::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), adv_v);
            accumulate(objective, diff::sum(diff::minimum(s1, s2)));
        } else {
            accumulate(objective, diff::sum(diff::mul(lp, adv_v)));
        }
        accumulate(neg_entropy, diff::sum(diff::mul(diff::exp(st.policy.log_probs), st.policy.log_probs)));
        accumulate(sq_err, diff::sum(diff::square(diff::sub(st.critic.value, tape.constant(std::move(ret))))));
    }
    const double inv = 1.0 / static_cast<double>(n);
    Var policy_loss = diff::scale(objective, -inv);
    Var value_loss = diff::scale(sq_err, inv);
    Var entropy = diff::scale(neg_entropy, -inv);
    out.total = diff::add(diff::add(policy_loss, diff::scale(value_loss, cfg.value_coef)),
                          diff::scale(entropy, -cfg.entropy_coef));
    out.policy_loss = policy_loss.scalar();
    out.value_loss = value_loss.scalar();
    out.entropy = entropy.scalar();
    return out;
}

struct Snapshot {
    diff::ParamStore params;
    std::vector<Tensor> m, v;
    std::int64_t steps;
};

Snapshot take_snapshot(const models::ActorCritic& net, const diff::Adam& adam) {
    return {net.params(), adam.first_moments(), adam.second_moments(), adam.steps()};
}

void restore(models::ActorCritic& net, diff::Adam& adam, const Snapshot& s) {
    for (std::size_t i = 0; i < s.params.size(); ++i) net.params()[i].value = s.params[i].value;
    adam.first_moments() = s.m;
    adam.second_moments() = s.v;
    adam.set_steps(s.steps);
    net.params().zero_grad();
}

void check_batch(const RolloutBatch& batch) {
    if (batch.advantages.size() != batch.size() || batch.returns.size() != batch.size()) {
        throw std::invalid_argument("update: batch has no advantages; run compute_returns_advantages first");
    }
}

UpdateStats run_update(models::ActorCritic& net, diff::Adam& adam, const RolloutBatch& batch, const UpdateConfig& cfg,
                       Algo algo, std::uint64_t seed) {
    cfg.validate();
    check_batch(batch);
    const auto& nc = net.config();
    const std::size_t len = chunk_length(batch, cfg.bptt_len);
    std::vector<std::size_t> chunks = chunk_starts(batch, cfg.bptt_len);

    UpdateStats stats;
    stats.sample_variance_psi2 = sample_variance_psi2(batch);
    stats.kappa_estimate = kappa_estimate(batch, net, cfg.kappa_samples, derive_seed(seed, "kappa"));

    const Snapshot snap = take_snapshot(net, adam);
    adam.config().lr = cfg.lr;
    const std::size_t epochs = algo == Algo::ppo ? cfg.epochs : 1;
    const std::size_t groups = algo == Algo::ppo ? std::min(cfg.n_minibatches, chunks.size()) : 1;
    Rng shuffle(derive_seed(seed, "minibatch"));

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        if (algo == Algo::ppo) {
            for (std::size_t i = chunks.size(); i > 1; --i) std::swap(chunks[i - 1], chunks[shuffle.uniform_int(i)]);
        }
        const bool last = epoch + 1 == epochs;
        double pl = 0.0, vl = 0.0, ent = 0.0, gn = 0.0;
        std::size_t clipped = 0, rows = 0;
        for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t lo = g * chunks.size() / groups, hi = (g + 1) * chunks.size() / groups;
            std::span<const std::size_t> mb(chunks.data() + lo, hi - lo);
            Tape tape;
            models::Binder bind(tape, net.params());
            net.params().zero_grad();
            LossParts loss = build_loss(tape, bind, nc, batch, cfg, algo, mb, len);
            const double total = loss.total.scalar();
            if (!std::isfinite(total)) {
                restore(net, adam, snap);
                stats.aborted = true;
                stats.abort_reason = "non-finite loss in epoch " + std::to_string(epoch) + ", minibatch " + std::to_string(g);
                return stats;
            }
            tape.backward(loss.total);
            const double norm = diff::clip_grad_norm(net.params(), cfg.max_grad_norm);
            if (!std::isfinite(norm)) {
                restore(net, adam, snap);
                stats.aborted = true;
                stats.abort_reason = "non-finite gradient in epoch " + std::to_string(epoch);
                return stats;
            }
            adam.step(net.params());
            if (last) {
                const double w = static_cast<double>(loss.rows);
                pl += loss.policy_loss * w;
                vl += loss.value_loss * w;
                ent += loss.entropy * w;
                gn += norm;
                clipped += loss.clipped;
                rows += loss.rows;
            }
        }
        if (last) {
            const double n = static_cast<double>(rows);
            stats.policy_loss = pl / n;
            stats.value_loss = vl / n;
            stats.entropy = ent / n;
            stats.clip_fraction = algo == Algo::ppo ? static_cast<double>(clipped) / n : 0.0;
            stats.grad_norm = gn / static_cast<double>(groups);
        }
    }
    net.params().zero_grad();
    stats.kl_old_new = kl_old_new(batch, net, cfg.bptt_len);
    return stats;
}

}  // namespace

UpdateStats ppo_update(models::ActorCritic& net, diff::Adam& adam, const RolloutBatch& batch, const UpdateConfig& cfg,
                       std::uint64_t seed) {
    return run_update(net, adam, batch, cfg, Algo::ppo, seed);
}

UpdateStats a2c_update(models::ActorCritic& net, diff::Adam& adam, const RolloutBatch& batch, const UpdateConfig& cfg,
                       std::uint64_t seed) {
    return run_update(net, adam, batch, cfg, Algo::a2c, seed);
}

std::vector<double> loss_gradient(models::ActorCritic& net, const RolloutBatch& batch, const UpdateConfig& cfg, Algo algo,
                                  std::span<const std::size_t> chunks) {
    check_batch(batch);
    const std::size_t len = chunk_length(batch, cfg.bptt_len);
    Tape tape;
    models::Binder bind(tape, net.params());
    net.params().zero_grad();
    LossParts loss = build_loss(tape, bind, net.config(), batch, cfg, algo, chunks, len);
    tape.backward(loss.total);
    auto g = net.params().flat_grads();
    net.params().zero_grad();
    return g;
}

}  // namespace dve::train
