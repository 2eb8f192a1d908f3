#include "dve/analysis/true_values.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "dve/diff/adam.hpp"
#include "dve/envs/solve.hpp"

namespace dve::analysis {

namespace {

std::size_t sample_action(const std::vector<double>& log_probs, Rng& rng) {
    std::vector<double> p(log_probs.size());
    for (std::size_t a = 0; a < p.size(); ++a) p[a] = std::exp(log_probs[a]);
    return rng.categorical(p);
}

struct Sample {
    std::vector<double> features;
    double target;
};

/// Discounted Monte Carlo returns of the frozen policy on one level, one
/// sample per visited step.
std::vector<Sample> mc_samples(const models::ActorCritic& net, const envs::LevelHandle& level,
                               const FineTuneConfig& cfg, Rng& rng) {
    std::vector<Sample> out;
    for (std::size_t e = 0; e < cfg.episodes; ++e) {
        std::size_t s = level.sample_start(rng);
        auto lstm = diff::LstmState::zeros(net.config().lstm_hidden);
        std::vector<Sample> ep;
        std::vector<double> rewards;
        for (std::size_t t = 0; t < cfg.horizon && !level.spec.is_terminal(s); ++t) {
            auto so = models::infer_step(net, level.observe(s), lstm);
            const std::size_t a = sample_action(so.policy.log_probs, rng);
            auto sr = envs::step(level, s, a, rng);
            ep.push_back({so.next_state.hidden, 0.0});
            rewards.push_back(sr.transition.reward);
            lstm = std::move(so.next_state);
            s = sr.next_state;
        }
        double g = 0.0;
        for (std::size_t t = ep.size(); t-- > 0;) {
            g = rewards[t] + level.spec.gamma * g;
            ep[t].target = g;
        }
        out.insert(out.end(), ep.begin(), ep.end());
    }
    return out;
}

diff::Tensor stack(const std::vector<std::vector<double>>& rows, std::size_t cols) {
    diff::Tensor t(diff::Shape{rows.size(), cols});
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), t.storage().begin() + static_cast<std::ptrdiff_t>(i * cols));
    return t;
}

}  // namespace

std::vector<ProbePoint> sample_probes(const models::ActorCritic& net, const std::vector<envs::LevelHandle>& levels,
                                      std::size_t count, std::uint64_t seed, std::size_t horizon) {
    if (levels.empty() || count == 0) throw std::invalid_argument("sample_probes: need levels and a positive count");
    Rng rng(seed);
    std::vector<ProbePoint> out;
    while (out.size() < count) {
        const std::size_t li = rng.uniform_int(levels.size());
        const auto& level = levels[li];
        std::size_t s = level.sample_start(rng);
        auto lstm = diff::LstmState::zeros(net.config().lstm_hidden);
        std::vector<ProbePoint> ep;
        for (std::size_t t = 0; t < horizon && !level.spec.is_terminal(s); ++t) {
            auto so = models::infer_step(net, level.observe(s), lstm);
            ep.push_back({li, s, lstm, so.next_state.hidden, so.critic.value});
            const std::size_t a = sample_action(so.policy.log_probs, rng);
            s = envs::step(level, s, a, rng).next_state;
            lstm = std::move(so.next_state);
        }
        if (!ep.empty()) out.push_back(std::move(ep[rng.uniform_int(ep.size())]));
    }
    return out;
}

TrueValueResult estimate_true_values(const models::ActorCritic& base, const std::vector<envs::LevelHandle>& levels,
                                     const std::vector<ProbePoint>& probes, const FineTuneConfig& cfg,
                                     std::uint64_t seed, const std::string& policy_tag, bool keep_tuned) {
    if (levels.empty() || probes.empty()) throw std::invalid_argument("estimate_true_values: need levels and probes");
    const auto& nc = base.config();
    const std::size_t H = nc.lstm_hidden;
    const auto critic_names = base.critic_parameter_names();
    const std::set<std::string> trainable(critic_names.begin(), critic_names.end());

    std::vector<std::vector<double>> probe_rows;
    for (const auto& p : probes) probe_rows.push_back(p.features);
    const diff::Tensor probe_x = stack(probe_rows, H);

    TrueValueResult res;
    res.matrix.n_states = probes.size();
    res.matrix.policy_tag = policy_tag;
    for (std::size_t k = 0; k < probes.size(); ++k) res.matrix.state_ids.push_back(k);

    for (std::size_t li = 0; li < levels.size(); ++li) {
        // Streams follow the level seed, so duplicated levels fit identically.
        Rng rng(derive_seed(seed, "finetune", levels[li].seed));
        const auto samples = mc_samples(base, levels[li], cfg, rng);
        std::vector<std::vector<double>> rows;
        diff::Tensor y(diff::Shape{samples.size(), 1});
        for (std::size_t i = 0; i < samples.size(); ++i) {
            rows.push_back(samples[i].features);
            y(i, 0) = samples[i].target;
        }
        const diff::Tensor x = stack(rows, H);

        models::ActorCritic net(nc, base.params());
        diff::Adam adam(net.params(), diff::AdamConfig{cfg.lr}, trainable);
        std::vector<double> history;
        bool finite = true;
        for (std::size_t step = 0; step < cfg.max_steps; ++step) {
            diff::Tape tape;
            models::Binder bind(tape, net.params(), trainable);
            auto crit = models::critic_forward(bind, nc, tape.reference(x));
            auto loss = diff::mean(diff::square(diff::sub(crit.value, tape.reference(y))));
            const double l = loss.scalar();
            if (!std::isfinite(l)) {
                finite = false;
                break;
            }
            history.push_back(l);
            const std::size_t w = cfg.plateau_window;
            if (w > 0 && history.size() > w) {
                const double old = history[history.size() - 1 - w];
                if ((old - l) / std::max(std::abs(old), 1e-300) < cfg.plateau_rel) break;
            }
            net.params().zero_grad();
            tape.backward(loss);
            adam.step(net.params());
        }
        if (!finite) {
            res.excluded.push_back(li);
            res.final_loss.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        res.final_loss.push_back(history.empty() ? 0.0 : history.back());
        diff::Tape tape(false);
        models::Binder bind(tape, net.params());
        auto v = models::critic_forward(bind, nc, tape.reference(probe_x)).value.value();
        res.matrix.values.insert(res.matrix.values.end(), v.begin(), v.end());
        res.matrix.level_ids.push_back(levels[li].seed);
        ++res.matrix.n_levels;
        if (keep_tuned) res.tuned.push_back(net.params());
    }
    return res;
}

ValueMatrix exact_values(const std::vector<envs::LevelHandle>& levels, const PolicyRule& rule,
                         const std::vector<std::size_t>& states, const std::string& policy_tag) {
    ValueMatrix m;
    m.n_levels = levels.size();
    m.n_states = states.size();
    m.state_ids = states;
    m.policy_tag = policy_tag;
    for (const auto& level : levels) {
        const auto v = envs::solve_value(level.spec, rule(level));
        for (auto s : states) {
            if (s >= v.size()) throw std::out_of_range("exact_values: probe state out of range");
            m.values.push_back(v[s]);
        }
        m.level_ids.push_back(level.seed);
    }
    m.validate();
    return m;
}

envs::TabularPolicy memoryless_policy(const models::ActorCritic& net, const envs::LevelHandle& level) {
    const std::size_t S = level.spec.n_states, A = level.spec.n_actions;
    envs::TabularPolicy p{S, A, std::vector<double>(S * A)};
    const auto zero = diff::LstmState::zeros(net.config().lstm_hidden);
    for (std::size_t s = 0; s < S; ++s) {
        const auto out = models::infer_step(net, level.observe(s), zero);
        for (std::size_t a = 0; a < A; ++a) p.probs[s * A + a] = std::exp(out.policy.log_probs[a]);
    }
    return p;
}

PredictionError prediction_error_mc(const models::ActorCritic& net, const std::vector<envs::LevelHandle>& levels,
                                    std::size_t n_probes, std::size_t continuations, std::uint64_t seed,
                                    std::size_t horizon, std::size_t cap) {
    if (continuations < 2) throw std::invalid_argument("prediction_error_mc: need at least two continuations");
    const auto probes = sample_probes(net, levels, n_probes, derive_seed(seed, "probes"), horizon);
    PredictionError pe;
    pe.probes = probes.size();
    for (std::size_t p = 0; p < probes.size(); ++p) {
        const auto& pt = probes[p];
        const auto& level = levels[pt.level_index];
        Rng rng(derive_seed(seed, "continuation", p));
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t k = 0; k < continuations; ++k) {
            std::size_t s = pt.state;
            auto lstm = pt.lstm;
            double g = 0.0, discount = 1.0;
            for (std::size_t t = 0; t < cap && !level.spec.is_terminal(s); ++t) {
                auto so = models::infer_step(net, level.observe(s), lstm);
                const std::size_t a = sample_action(so.policy.log_probs, rng);
                auto sr = envs::step(level, s, a, rng);
                g += discount * sr.transition.reward;
                discount *= level.spec.gamma;
                s = sr.next_state;
                lstm = std::move(so.next_state);
            }
            sum += g;
            sum_sq += g * g;
        }
        const double K = static_cast<double>(continuations);
        const double mean = sum / K;
        const double var = std::max(0.0, (sum_sq - K * mean * mean) / (K - 1.0));
        const double err = mean - pt.value_pred;
        pe.raw_mean_sq += err * err;
        pe.mean_noise += var / K;
    }
    const double n = static_cast<double>(probes.size());
    pe.raw_mean_sq /= n;
    pe.mean_noise /= n;
    pe.mean_sq_error = pe.raw_mean_sq - pe.mean_noise;
    return pe;
}

}  // namespace dve::analysis
