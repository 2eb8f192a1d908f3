#include "dve/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dve/envs/episode.hpp"
#include "dve/textio.hpp"
#include "dve/train/advantage.hpp"
#include "dve/train/diagnostics.hpp"

namespace dve::train {

void TrainConfig::validate() const {
    if (n_levels == 0) throw std::invalid_argument("n_levels must be >= 1");
    if (rollout.n_workers == 0 || rollout.steps_per_worker == 0 || rollout.horizon == 0) {
        throw std::invalid_argument("n_workers, steps_per_worker and horizon must be >= 1");
    }
    if (!(gamma >= 0.0 && gamma <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("gamma and lambda must lie in [0, 1]");
    }
    if (total_steps <= 0) throw std::invalid_argument("total_steps must be >= 1");
    const std::size_t len = std::min(update.bptt_len, rollout.steps_per_worker);
    if (len == 0 || rollout.steps_per_worker % len != 0) {
        throw std::invalid_argument("bptt_len must divide steps_per_worker");
    }
    update.validate();
}

std::int64_t TrainConfig::total_updates() const {
    const auto per = static_cast<std::int64_t>(steps_per_update());
    return (total_steps + per - 1) / per;
}

std::vector<envs::LevelHandle> make_levels(const TrainConfig& cfg) {
    return envs::generate_level_set(cfg.family, cfg.level_seed, cfg.n_levels);
}

models::NetConfig net_config(const TrainConfig& cfg, const envs::LevelHandle& level) {
    models::NetConfig nc;
    nc.obs_dim = level.obs_dim();
    nc.n_actions = level.n_actions();
    nc.encoder_hidden = cfg.encoder_hidden;
    nc.lstm_hidden = cfg.lstm_hidden;
    nc.head = cfg.head;
    nc.n_basis = cfg.n_basis;
    nc.n_control = cfg.n_control;
    return nc;
}

std::string metrics_header() {
    return "step,mean_episode_reward,policy_loss,value_loss,entropy,kl_old_new,sample_variance_psi2,"
           "kappa_estimate,clip_fraction,mean_confusion";
}

std::string metrics_row(const UpdateRecord& r) {
    using textio::num;
    const auto& s = r.stats;
    return std::to_string(r.step) + ',' + num(r.mean_episode_reward) + ',' + num(s.policy_loss) + ',' +
           num(s.value_loss) + ',' + num(s.entropy) + ',' + num(s.kl_old_new) + ',' + num(s.sample_variance_psi2) +
           ',' + num(s.kappa_estimate) + ',' + num(s.clip_fraction) + ',' + num(r.mean_confusion);
}

EvalReport evaluate_policy(const models::ActorCritic& net, const std::vector<envs::LevelHandle>& levels,
                           std::size_t episodes, std::uint64_t seed, bool greedy, std::size_t horizon) {
    if (episodes == 0) throw std::invalid_argument("evaluate_policy: need at least one episode");
    if (levels.empty()) throw std::invalid_argument("evaluate_policy: empty level set");
    EvalReport report;
    for (std::size_t e = 0; e < episodes; ++e) {
        const auto& level = levels[e % levels.size()];
        if (level.obs_dim() != net.config().obs_dim || level.n_actions() != net.config().n_actions) {
            throw std::invalid_argument("evaluate_policy: level does not match the network");
        }
        Rng rng(derive_seed(seed, "eval", e));
        diff::LstmState state = diff::LstmState::zeros(net.config().lstm_hidden);
        envs::ActionFn act = [&](std::span<const double> obs, Rng& r) {
            auto out = models::infer_step(net, obs, state);
            state = std::move(out.next_state);
            const auto& lp = out.policy.log_probs;
            if (greedy) return static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
            std::vector<double> p(lp.size());
            for (std::size_t a = 0; a < lp.size(); ++a) p[a] = std::exp(lp[a]);
            return r.categorical(p);
        };
        report.episodes.push_back(envs::outcome(envs::run_episode(level, act, rng, horizon)));
    }
    report.metrics = envs::spl(report.episodes);
    return report;
}

Trainer::Trainer(TrainConfig cfg)
    : cfg_((cfg.validate(), cfg)),
      levels_(make_levels(cfg_)),
      net_(net_config(cfg_, levels_.front()), derive_seed(cfg_.seed, "network")),
      adam_(net_.params(), diff::AdamConfig{cfg_.update.lr}) {}

Trainer::Trainer(TrainConfig cfg, const models::Checkpoint& ck)
    : cfg_((cfg.validate(), cfg)),
      levels_(make_levels(cfg_)),
      net_(ck.config, ck.params),
      adam_(net_.params(), diff::AdamConfig{cfg_.update.lr}) {
    if (!(ck.config == net_config(cfg_, levels_.front()))) {
        throw std::invalid_argument("checkpoint network does not match the run configuration");
    }
    auto expect = [&](const char* key, const std::string& want) {
        auto it = ck.extra.find(key);
        if (it == ck.extra.end() || it->second != want) {
            throw std::invalid_argument(std::string("checkpoint '") + key + "' does not match the run configuration");
        }
    };
    expect("family", envs::family_name(cfg_.family));
    expect("algo", algo_name(cfg_.algo));
    expect("n_levels", std::to_string(cfg_.n_levels));
    expect("level_seed", std::to_string(cfg_.level_seed));
    if (ck.seed != cfg_.seed) throw std::invalid_argument("checkpoint seed does not match the run configuration");
    if (!ck.optimizer) throw std::invalid_argument("checkpoint has no optimizer state; cannot resume");
    models::restore_optimizer(adam_, *ck.optimizer);
    update_ = ck.update;
    env_steps_ = ck.env_steps;
}

UpdateRecord Trainer::step() {
    if (finished()) throw std::logic_error("Trainer::step: run already finished");
    const std::uint64_t useed = derive_seed(cfg_.seed, "update", static_cast<std::uint64_t>(update_));
    std::vector<std::uint64_t> worker_seeds(cfg_.rollout.n_workers);
    for (std::size_t w = 0; w < worker_seeds.size(); ++w) worker_seeds[w] = derive_seed(useed, "worker", w);

    RolloutBatch batch = collect_rollouts(net_, levels_, cfg_.rollout, worker_seeds);
    compute_returns_advantages(batch, cfg_.gamma, cfg_.lambda);

    UpdateRecord rec;
    rec.mean_confusion = mean_confusion(batch);
    rec.episodes = batch.episodes.size();
    if (batch.episodes.empty()) {
        rec.mean_episode_reward = std::numeric_limits<double>::quiet_NaN();
    } else {
        double total = 0.0;
        for (const auto& e : batch.episodes) total += e.total_reward;
        rec.mean_episode_reward = total / static_cast<double>(batch.episodes.size());
    }
    rec.stats = cfg_.algo == Algo::ppo ? ppo_update(net_, adam_, batch, cfg_.update, useed)
                                       : a2c_update(net_, adam_, batch, cfg_.update, useed);
    ++update_;
    env_steps_ += static_cast<std::int64_t>(batch.size());
    rec.update = update_;
    rec.step = env_steps_;
    return rec;
}

models::Checkpoint Trainer::checkpoint() const {
    models::Checkpoint ck;
    ck.config = net_.config();
    ck.seed = cfg_.seed;
    ck.update = update_;
    ck.env_steps = env_steps_;
    ck.params = net_.params();
    ck.optimizer = models::capture_optimizer(adam_);
    ck.extra["family"] = envs::family_name(cfg_.family);
    ck.extra["algo"] = algo_name(cfg_.algo);
    ck.extra["n_levels"] = std::to_string(cfg_.n_levels);
    ck.extra["level_seed"] = std::to_string(cfg_.level_seed);
    return ck;
}

}  // namespace dve::train
