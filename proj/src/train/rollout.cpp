#include "dve/train/rollout.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

namespace dve::train {

namespace {

void run_worker(const models::ActorCritic& net, std::span<const envs::LevelHandle> levels, const RolloutConfig& cfg,
                std::size_t worker, std::uint64_t seed, RolloutBatch& out, std::vector<EpisodeRecord>& episodes) {
    Rng rng(seed);
    const auto& nc = net.config();
    const std::size_t H = nc.lstm_hidden, A = nc.n_actions;

    std::size_t level_idx = 0, state = 0, ep_len = 0;
    double ep_reward = 0.0, ep_return = 0.0, discount = 1.0;
    diff::LstmState lstm;
    bool fresh = true;

    for (std::size_t t = 0; t < cfg.steps_per_worker; ++t) {
        if (fresh) {
            level_idx = rng.uniform_int(levels.size());
            state = levels[level_idx].sample_start(rng);
            lstm = diff::LstmState::zeros(H);
            ep_len = 0;
            ep_reward = ep_return = 0.0;
            discount = 1.0;
        }
        const envs::LevelHandle& level = levels[level_idx];
        const std::size_t i = out.index(worker, t);

        const auto obs = level.observe(state);
        if (obs.size() != out.obs_dim) throw std::invalid_argument("collect_rollouts: observation size differs from the network");
        std::copy(obs.begin(), obs.end(), out.obs.begin() + static_cast<std::ptrdiff_t>(i * out.obs_dim));
        std::copy(lstm.hidden.begin(), lstm.hidden.end(), out.state_hidden.begin() + static_cast<std::ptrdiff_t>(i * H));
        std::copy(lstm.cell.begin(), lstm.cell.end(), out.state_cell.begin() + static_cast<std::ptrdiff_t>(i * H));
        out.episode_start[i] = fresh ? 1 : 0;
        out.level_id[i] = level_idx;

        models::StepOutput so = models::infer_step(net, obs, lstm);
        std::vector<double> probs(A);
        for (std::size_t a = 0; a < A; ++a) probs[a] = std::exp(so.policy.log_probs[a]);
        const std::size_t action = rng.categorical(probs);

        envs::StepResult sr = envs::step(level, state, action, rng);
        out.action[i] = action;
        out.log_prob_old[i] = so.policy.log_probs[action];
        std::copy(so.policy.log_probs.begin(), so.policy.log_probs.end(),
                  out.old_log_probs.begin() + static_cast<std::ptrdiff_t>(i * A));
        out.reward[i] = sr.transition.reward;
        out.value_pred[i] = so.critic.value;
        if (out.n_basis) {
            std::copy(so.critic.alpha->begin(), so.critic.alpha->end(),
                      out.alpha.begin() + static_cast<std::ptrdiff_t>(i * out.n_basis));
        }

        ++ep_len;
        ep_reward += sr.transition.reward;
        ep_return += discount * sr.transition.reward;
        discount *= level.spec.gamma;

        const bool terminal = level.spec.is_terminal(sr.next_state);
        const bool truncated = !terminal && ep_len >= cfg.horizon;
        out.done[i] = (terminal || truncated) ? 1 : 0;
        out.truncated[i] = truncated ? 1 : 0;
        out.next_value[i] = 0.0;
        if (truncated || (!terminal && t + 1 == cfg.steps_per_worker)) {
            out.next_value[i] = models::infer_step(net, level.observe(sr.next_state), so.next_state).critic.value;
        }
        if (terminal || truncated) {
            const bool success = level.family == envs::Family::gapworld && level.is_goal(sr.next_state);
            episodes.push_back({worker, level_idx, ep_reward, ep_return, ep_len, success, truncated});
            fresh = true;
        } else {
            state = sr.next_state;
            lstm = std::move(so.next_state);
            fresh = false;
        }
    }
}

}  // namespace

RolloutBatch collect_rollouts(const models::ActorCritic& net, std::span<const envs::LevelHandle> levels,
                              const RolloutConfig& cfg, std::span<const std::uint64_t> worker_seeds) {
    if (cfg.n_workers == 0 || cfg.steps_per_worker == 0) {
        throw std::invalid_argument("collect_rollouts: need at least one worker and one step");
    }
    if (cfg.horizon == 0) throw std::invalid_argument("collect_rollouts: horizon must be >= 1");
    if (levels.empty()) throw std::invalid_argument("collect_rollouts: empty level set");
    if (worker_seeds.size() != cfg.n_workers) throw std::invalid_argument("collect_rollouts: need one seed per worker");

    const auto& nc = net.config();
    RolloutBatch b;
    b.n_workers = cfg.n_workers;
    b.steps_per_worker = cfg.steps_per_worker;
    b.obs_dim = nc.obs_dim;
    b.n_actions = nc.n_actions;
    b.hidden = nc.lstm_hidden;
    b.n_basis = nc.head == models::HeadKind::dynamic ? nc.n_basis : 0;
    const std::size_t N = b.size();
    b.obs.assign(N * b.obs_dim, 0.0);
    b.action.assign(N, 0);
    b.log_prob_old.assign(N, 0.0);
    b.old_log_probs.assign(N * b.n_actions, 0.0);
    b.reward.assign(N, 0.0);
    b.value_pred.assign(N, 0.0);
    b.done.assign(N, 0);
    b.truncated.assign(N, 0);
    b.episode_start.assign(N, 0);
    b.next_value.assign(N, 0.0);
    b.level_id.assign(N, 0);
    b.state_hidden.assign(N * b.hidden, 0.0);
    b.state_cell.assign(N * b.hidden, 0.0);
    b.alpha.assign(N * b.n_basis, 0.0);

    // Workers write disjoint slices of the preallocated arrays.
    std::vector<std::vector<EpisodeRecord>> episodes(cfg.n_workers);
    std::vector<std::exception_ptr> errors(cfg.n_workers);
    std::vector<std::thread> threads;
    threads.reserve(cfg.n_workers);
    for (std::size_t w = 0; w < cfg.n_workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                run_worker(net, levels, cfg, w, worker_seeds[w], b, episodes[w]);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    for (auto& e : episodes) b.episodes.insert(b.episodes.end(), e.begin(), e.end());
    return b;
}

}  // namespace dve::train
