#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dve/envs/level.hpp"
#include "dve/train/advantage.hpp"
#include "dve/train/diagnostics.hpp"
#include "dve/train/replay.hpp"
#include "dve/train/rollout.hpp"
#include "dve/train/trainer.hpp"
#include "dve/train/update.hpp"

using namespace dve;
using namespace dve::train;
using models::ActorCritic;
using models::HeadKind;
using models::NetConfig;

namespace {

NetConfig tiny_net(const envs::LevelHandle& lvl, HeadKind head = HeadKind::baseline) {
    NetConfig c;
    c.obs_dim = lvl.obs_dim();
    c.n_actions = lvl.n_actions();
    c.encoder_hidden = 6;
    c.lstm_hidden = 5;
    c.head = head;
    c.n_basis = 3;
    c.n_control = 6;
    return c;
}

/// One decision, then absorption; only the last action pays.
envs::LevelHandle bandit() {
    envs::MdpSpec m;
    m.n_states = 2;
    m.n_actions = 3;
    m.gamma = 0.9;
    m.transition.assign(2 * 3 * 2, 0.0);
    m.reward.assign(2 * 3 * 2, 0.0);
    for (std::size_t a = 0; a < 3; ++a) {
        m.transition[m.index(0, a, 1)] = 1.0;
        m.transition[m.index(1, a, 1)] = 1.0;
    }
    m.reward[m.index(0, 2, 1)] = 1.0;
    m.terminal = {1};
    m.start_dist = {1.0, 0.0};
    return envs::level_from_spec(m, 0);
}

std::vector<std::uint64_t> seeds(std::size_t n, std::uint64_t base) {
    std::vector<std::uint64_t> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = derive_seed(base, "w", i);
    return s;
}

RolloutBatch fresh_batch(const ActorCritic& net, const std::vector<envs::LevelHandle>& levels, std::uint64_t seed,
                         std::size_t workers = 2, std::size_t steps = 16) {
    RolloutConfig rc{workers, steps, 20};
    auto b = collect_rollouts(net, levels, rc, seeds(workers, seed));
    compute_returns_advantages(b, 0.99, 0.95);
    return b;
}

double policy_prob(const ActorCritic& net, const envs::LevelHandle& lvl, std::size_t a) {
    const auto out = models::infer_step(net, lvl.observe(0), diff::LstmState::zeros(net.config().lstm_hidden));
    return std::exp(out.policy.log_probs[a]);
}

}  // namespace

TEST_CASE("collect_rollouts: determinism and accounting") {
    const auto levels = envs::generate_level_set(envs::Family::gapworld, 10, 3);
    const ActorCritic net(tiny_net(levels[0]), 1);
    RolloutConfig one{1, 32, 50};
    const auto a = collect_rollouts(net, levels, one, seeds(1, 5));
    const auto b = collect_rollouts(net, levels, one, seeds(1, 5));
    CHECK(a.obs == b.obs);
    CHECK(a.action == b.action);
    CHECK(a.reward == b.reward);
    RolloutConfig four{4, 24, 50};
    const auto c = collect_rollouts(net, levels, four, seeds(4, 6));
    CHECK(c.size() == 96);
    CHECK(c.action.size() == 96);
    CHECK_THROWS_AS(collect_rollouts(net, levels, RolloutConfig{0, 24, 50}, seeds(0, 1)), std::invalid_argument);
}

TEST_CASE("collect_rollouts: level sampling is uniform") {
    const auto levels = envs::generate_level_set(envs::Family::tabular, 3, 4);
    const ActorCritic net(tiny_net(levels[0]), 2);
    RolloutConfig rc{1, 4096, 3};
    std::vector<double> counts(4, 0.0);
    double total = 0.0;
    for (std::uint64_t r = 0; total < 10000; ++r) {
        const auto b = collect_rollouts(net, levels, rc, seeds(1, 100 + r));
        for (const auto& e : b.episodes) {
            counts[e.level_id] += 1.0;
            total += 1.0;
        }
    }
    for (double c : counts) {
        const double p = 0.25;
        CHECK(std::abs(c - total * p) <= 3.0 * std::sqrt(total * p * (1 - p)));
    }
}

TEST_CASE("gae: closed forms and the discounted-sum oracle") {
    std::vector<double> r{1, 1, 1}, v{0, 0, 0}, nv{0, 0, 0};
    std::vector<std::uint8_t> done{0, 0, 1}, trunc{0, 0, 0};
    const auto adv = gae(Segment{r, v, done, trunc, nv}, 1.0, 1.0);
    CHECK(adv[0] == 3.0);
    CHECK(adv[1] == 2.0);
    CHECK(adv[2] == 1.0);

    Rng rng(17);
    const std::size_t T = 40;
    std::vector<double> rw(T), val(T), next(T, 0.0);
    std::vector<std::uint8_t> dn(T, 0), tr(T, 0);
    for (std::size_t t = 0; t < T; ++t) {
        rw[t] = rng.normal();
        val[t] = rng.normal();
        if (rng.uniform() < 0.1) dn[t] = 1;
        if (dn[t] && rng.uniform() < 0.5) {
            tr[t] = 1;
            next[t] = rng.normal();
        }
    }
    next[T - 1] = 0.7;  // bootstrap at the segment end
    const double gamma = 0.97;
    auto v_next = [&](std::size_t t) { return t + 1 < T && !dn[t] ? val[t + 1] : next[t]; };
    auto cut = [&](std::size_t t) { return dn[t] && !tr[t]; };

    const auto a0 = gae(Segment{rw, val, dn, tr, next}, gamma, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        const double want = rw[t] + (cut(t) ? 0.0 : gamma * v_next(t)) - val[t];
        CHECK(a0[t] == doctest::Approx(want).epsilon(1e-12));
    }
    const auto a1 = gae(Segment{rw, val, dn, tr, next}, gamma, 1.0);
    for (std::size_t t = 0; t < T; ++t) {
        // Direct discounted return up to the end of this episode or segment.
        double g = 0.0, disc = 1.0;
        std::size_t k = t;
        for (;; ++k) {
            g += disc * rw[k];
            disc *= gamma;
            if (dn[k] || k + 1 == T) break;
        }
        if (!cut(k)) g += disc * next[k];
        CHECK(std::abs(a1[t] - (g - val[t])) <= 1e-10);
    }
}

TEST_CASE("compute_returns_advantages rejects bad gamma or lambda") {
    const auto levels = envs::generate_level_set(envs::Family::tabular, 3, 2);
    const ActorCritic net(tiny_net(levels[0]), 2);
    RolloutConfig rc{1, 8, 5};
    auto b = collect_rollouts(net, levels, rc, seeds(1, 1));
    CHECK_THROWS_AS(compute_returns_advantages(b, 1.2, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(compute_returns_advantages(b, 0.9, -0.1), std::invalid_argument);
}

TEST_CASE("zero learning rate leaves parameters and policy unchanged") {
    const auto levels = envs::generate_level_set(envs::Family::gapworld, 10, 2);
    for (auto algo : {Algo::ppo, Algo::a2c}) {
        ActorCritic net(tiny_net(levels[0]), 3);
        const auto before = net.params().flat_values();
        UpdateConfig uc;
        uc.lr = 0.0;
        uc.bptt_len = 8;
        uc.n_minibatches = 2;
        diff::Adam adam(net.params(), diff::AdamConfig{0.0});
        const auto b = fresh_batch(net, levels, 4);
        const auto st = algo == Algo::ppo ? ppo_update(net, adam, b, uc, 1) : a2c_update(net, adam, b, uc, 1);
        CHECK(net.params().flat_values() == before);
        CHECK(std::abs(st.kl_old_new) <= 1e-12);
        CHECK_FALSE(st.aborted);
    }
}

TEST_CASE("zero advantages remove the policy term from the gradient") {
    const auto levels = envs::generate_level_set(envs::Family::gapworld, 10, 2);
    ActorCritic net(tiny_net(levels[0]), 3);
    auto b = fresh_batch(net, levels, 8);
    std::fill(b.advantages.begin(), b.advantages.end(), 0.0);
    UpdateConfig uc;
    uc.bptt_len = 8;
    uc.value_coef = 0.0;
    uc.entropy_coef = 0.0;
    uc.normalize_advantages = false;
    const auto chunks = chunk_starts(b, uc.bptt_len);
    for (auto algo : {Algo::ppo, Algo::a2c}) {
        const auto g = loss_gradient(net, b, uc, algo, chunks);
        for (double x : g) CHECK(x == 0.0);
    }
    uc.value_coef = 0.5;
    const auto g = loss_gradient(net, b, uc, Algo::ppo, chunks);
    CHECK(std::any_of(g.begin(), g.end(), [](double x) { return x != 0.0; }));
}

TEST_CASE("a2c with unit advantages follows the mean score direction") {
    const auto lvl = bandit();
    auto cfg = tiny_net(lvl);
    diff::ParamStore zero = ActorCritic::make_layout(cfg);
    ActorCritic net(cfg, zero);  // zero weights: uniform policy everywhere
    auto b = collect_rollouts(net, std::vector<envs::LevelHandle>{lvl}, RolloutConfig{1, 32, 5}, seeds(1, 3));
    compute_returns_advantages(b, 0.9, 1.0);
    std::fill(b.advantages.begin(), b.advantages.end(), 1.0);
    UpdateConfig uc;
    uc.bptt_len = 8;
    uc.value_coef = 0.0;
    uc.entropy_coef = 0.0;
    uc.normalize_advantages = false;
    const auto g = loss_gradient(net, b, uc, Algo::a2c, chunk_starts(b, uc.bptt_len));
    // Only the actor bias sees a non-zero input under zero weights. Its loss
    // gradient is -(1/N) sum_i (e_{a_i} - 1/3).
    std::size_t off = 0;
    for (const auto& p : net.params()) {
        if (p.name == "actor.b") break;
        off += p.value.size();
    }
    std::vector<double> counts(3, 0.0);
    for (auto a : b.action) counts[a] += 1.0;
    const double n = static_cast<double>(b.size());
    for (std::size_t a = 0; a < 3; ++a) CHECK(g[off + a] == doctest::Approx(-(counts[a] / n - 1.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("bandit: ppo and a2c converge on the best arm") {
    const std::vector<envs::LevelHandle> levels{bandit()};
    for (auto algo : {Algo::ppo, Algo::a2c}) {
        ActorCritic net(tiny_net(levels[0]), 11);
        UpdateConfig uc;
        uc.lr = 1e-2;
        uc.bptt_len = 8;
        uc.n_minibatches = 2;
        uc.kappa_samples = 4;
        diff::Adam adam(net.params(), diff::AdamConfig{uc.lr});
        for (std::uint64_t u = 0; u < 200; ++u) {
            const auto b = fresh_batch(net, levels, 1000 + u, 2, 16);
            const auto st = algo == Algo::ppo ? ppo_update(net, adam, b, uc, u) : a2c_update(net, adam, b, uc, u);
            REQUIRE_FALSE(st.aborted);
        }
        CHECK_MESSAGE(policy_prob(net, levels[0], 2) > 0.95, algo_name(algo));
    }
}

TEST_CASE("kl divergence") {
    const std::vector<double> p{std::log(0.5), std::log(0.5)}, q{std::log(0.75), std::log(0.25)};
    const double direct = 0.5 * std::log(0.5 / 0.75) + 0.5 * std::log(0.5 / 0.25);
    CHECK(kl_divergence(p, q) == doctest::Approx(0.1438).epsilon(1e-3));
    CHECK(kl_divergence(p, q) == doctest::Approx(direct).epsilon(1e-14));
    CHECK(kl_divergence(p, p) == 0.0);
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> a(4), c(4);
        double za = 0, zc = 0;
        for (int k = 0; k < 4; ++k) za += a[k] = rng.uniform(0.01, 1), zc += c[k] = rng.uniform(0.01, 1);
        for (int k = 0; k < 4; ++k) a[k] = std::log(a[k] / za), c[k] = std::log(c[k] / zc);
        CHECK(kl_divergence(a, c) >= -1e-9);
    }
    const auto levels = envs::generate_level_set(envs::Family::gapworld, 10, 2);
    const ActorCritic net(tiny_net(levels[0]), 3);
    const auto b = fresh_batch(net, levels, 9);
    CHECK(std::abs(kl_old_new(b, net, 8)) <= 1e-12);
}

TEST_CASE("sample_variance_psi2") {
    RolloutBatch b;
    b.advantages = {1.0, -1.0};
    CHECK(sample_variance_psi2(b) == 1.0);
    b.advantages = {0.0, 0.0, 0.0};
    CHECK(sample_variance_psi2(b) == 0.0);
    Rng rng(6);
    b.advantages.resize(1000);
    for (auto& a : b.advantages) a = rng.normal(0.3, 2.0);
    double two_pass = 0.0;
    for (double a : b.advantages) two_pass += a * a;
    two_pass /= 1000.0;
    CHECK(std::abs(sample_variance_psi2(b) - two_pass) <= 1e-12);
}

TEST_CASE("kappa: finite-difference oracle, saturation and sign") {
    const auto levels = envs::generate_level_set(envs::Family::gapworld, 10, 2);
    ActorCritic net(tiny_net(levels[0]), 5);
    const auto b = fresh_batch(net, levels, 12, 1, 8);
    const auto names = net.policy_parameter_names();
    std::vector<std::size_t> rows(b.size());
    std::iota(rows.begin(), rows.end(), 0);
    const auto norms = score_norms_sq(b, net, rows);

    auto logp = [&](const ActorCritic& n, std::size_t i) {
        diff::LstmState st{std::vector<double>(b.state_hidden.begin() + i * b.hidden, b.state_hidden.begin() + (i + 1) * b.hidden),
                           std::vector<double>(b.state_cell.begin() + i * b.hidden, b.state_cell.begin() + (i + 1) * b.hidden)};
        return models::infer_step(n, b.obs_row(i), st).policy.log_probs[b.action[i]];
    };
    const double h = 1e-5;
    double fd_mean = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        double n2 = 0.0;
        for (const auto& name : names) {
            auto& t = net.params().get(name).value;
            for (std::size_t k = 0; k < t.size(); ++k) {
                const double keep = t[k];
                t[k] = keep + h;
                const double up = logp(net, i);
                t[k] = keep - h;
                const double dn = logp(net, i);
                t[k] = keep;
                const double d = (up - dn) / (2 * h);
                n2 += d * d;
            }
        }
        CHECK(norms[i] == doctest::Approx(n2).epsilon(1e-3));
        CHECK(norms[i] >= 0.0);
        const auto full = score_gradient(net, b, i);
        double g2 = 0.0;
        for (double g : full) g2 += g * g;
        CHECK(g2 == doctest::Approx(norms[i]).epsilon(1e-9));
        fd_mean += n2;
    }
    fd_mean /= static_cast<double>(b.size());
    CHECK(kappa_estimate(b, net, 1000, 1) == doctest::Approx(fd_mean).epsilon(1e-3));

    // Saturate the policy on the taken action: the score vanishes.
    ActorCritic sat(net.config(), net.params());
    for (auto& v : sat.params().get("actor.w").value.storage()) v = 0.0;
    auto& bias = sat.params().get("actor.b").value;
    const auto bsat = fresh_batch(sat, levels, 13, 1, 8);
    bias[0] = 60.0;
    bias[1] = -60.0;
    RolloutBatch forced = bsat;
    std::fill(forced.action.begin(), forced.action.end(), 0);
    CHECK(kappa_estimate(forced, sat, 100, 2) < 1e-40);
}

TEST_CASE("trainer: checkpoint resume reproduces the uninterrupted run") {
    TrainConfig tc;
    tc.family = envs::Family::gapworld;
    tc.n_levels = 4;
    tc.encoder_hidden = 8;
    tc.lstm_hidden = 6;
    tc.head = HeadKind::dynamic;
    tc.n_basis = 3;
    tc.rollout = RolloutConfig{2, 16, 40};
    tc.update.bptt_len = 8;
    tc.update.n_minibatches = 2;
    tc.update.kappa_samples = 8;
    tc.total_steps = 32 * 6;
    tc.seed = 77;

    Trainer full(tc);
    std::vector<std::string> rows;
    while (!full.finished()) rows.push_back(metrics_row(full.step()));
    CHECK(rows.size() == 6);

    Trainer first(tc);
    for (int i = 0; i < 3; ++i) CHECK(metrics_row(first.step()) == rows[i]);
    const auto text = models::serialize_checkpoint(first.checkpoint());
    Trainer resumed(tc, models::parse_checkpoint(text));
    for (int i = 3; i < 6; ++i) CHECK(metrics_row(resumed.step()) == rows[i]);
    CHECK(resumed.net().params().flat_values() == full.net().params().flat_values());

    TrainConfig other = tc;
    other.level_seed += 1;
    CHECK_THROWS_AS(Trainer(other, models::parse_checkpoint(text)), std::invalid_argument);
}
