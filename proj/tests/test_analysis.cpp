#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "dve/analysis/exact.hpp"
#include "dve/analysis/experiments.hpp"
#include "dve/analysis/gmm.hpp"
#include "dve/analysis/true_values.hpp"
#include "dve/analysis/value_matrix.hpp"
#include "dve/envs/solve.hpp"

using namespace dve;
using namespace dve::analysis;

namespace {

std::vector<double> normals(std::size_t n, double mean, double sd, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal(mean, sd);
    return v;
}

envs::TabularPolicy random_softmax(const envs::LevelHandle& l, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> logits(l.spec.n_states * l.spec.n_actions);
    for (auto& x : logits) x = rng.normal();
    return softmax_policy(l.spec.n_states, l.spec.n_actions, logits);
}

models::NetConfig small_net(const envs::LevelHandle& l, models::HeadKind head) {
    models::NetConfig c;
    c.obs_dim = l.obs_dim();
    c.n_actions = l.n_actions();
    c.encoder_hidden = 8;
    c.lstm_hidden = 6;
    c.head = head;
    c.n_basis = 3;
    c.n_control = 6;
    return c;
}

}  // namespace

TEST_CASE("em_fit: one component is the maximum-likelihood Gaussian") {
    Rng rng(1);
    const auto x = normals(200, 2.0, 3.0, rng);
    const auto fit = em_fit(x, 200, 1, 1, EmConfig{}, 5);
    double mean = 0.0, var = 0.0;
    for (double v : x) mean += v;
    mean /= 200.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= 200.0;
    CHECK(std::abs(fit.means[0] - mean) <= 1e-9);
    CHECK(std::abs(fit.variances[0] - var) <= 1e-9);
    CHECK(std::abs(fit.weights[0] - 1.0) <= 1e-12);
    CHECK_THROWS_AS(em_fit(x, 1, 200, 1, EmConfig{}, 5), std::invalid_argument);
}

TEST_CASE("em_fit recovers two planted clusters") {
    Rng rng(2);
    auto a = normals(500, -10.0, 1.0, rng);
    const auto b = normals(500, 10.0, 1.0, rng);
    for (double v : b) a.push_back(v);
    const auto fit = em_fit(a, 1000, 1, 2, EmConfig{}, 9);
    const bool first_low = fit.means[0] < fit.means[1];
    CHECK(std::abs(fit.means[first_low ? 0 : 1] + 10.0) <= 0.3);
    CHECK(std::abs(fit.means[first_low ? 1 : 0] - 10.0) <= 0.3);
    CHECK(std::abs(fit.weights[0] - 0.5) <= 0.05);
    CHECK(std::abs(fit.weights[0] + fit.weights[1] - 1.0) <= 1e-9);
}

TEST_CASE("em_fit log-likelihood is monotone on random data") {
    Rng rng(3);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto x = normals(120 * 3, 0.0, 1.0, rng);
        for (std::size_t C : {2u, 3u, 5u}) {
            const auto fit = em_fit(x, 120, 3, C, EmConfig{}, s);
            for (std::size_t i = 1; i < fit.ll_trace.size(); ++i) CHECK(fit.ll_trace[i] >= fit.ll_trace[i - 1] - 1e-9);
            for (double v : fit.variances) CHECK(v >= 1e-6);
        }
    }
}

TEST_CASE("aic: closed-form Gaussian log-likelihood and parameter arithmetic") {
    Rng rng(4);
    const auto x = normals(100, 0.0, 1.0, rng);
    const auto fit = em_fit(x, 100, 1, 1, EmConfig{}, 1);
    double mean = 0.0, var = 0.0;
    for (double v : x) mean += v;
    mean /= 100.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= 100.0;
    const double ll = -50.0 * (std::log(2.0 * std::numbers::pi * var) + 1.0);
    CHECK(aic_score(fit) == doctest::Approx(2.0 * 2.0 - 2.0 * ll).epsilon(1e-10));
    CHECK(fit.aic == aic_score(fit));
    for (std::size_t d : {1u, 4u, 64u}) {
        GmmFit g;
        g.dim = d;
        g.log_likelihood = -123.4;
        g.n_components = 3;
        g.n_params = gmm_parameter_count(3, d);
        const double a3 = aic_score(g);
        g.n_components = 4;
        g.n_params = gmm_parameter_count(4, d);
        CHECK(aic_score(g) - a3 == doctest::Approx(2.0 * (1.0 + 2.0 * d)));
    }
    CHECK(gmm_parameter_count(2, 3) == 1 + 6 + 6);
}

TEST_CASE("select_num_clusters: curve shape, planted archetypes and rejection") {
    const auto two = synthetic_archetype_matrix(50, 64, 2, 0.3, 11);
    const auto sel = select_num_clusters(two.values, 50, 64, 10, EmConfig{}, 1);
    CHECK(sel.aic_per_point.size() == 10);
    for (double a : sel.aic_per_point) CHECK(std::isfinite(a));
    CHECK(sel.best == 2);
    const auto one = synthetic_archetype_matrix(50, 64, 1, 0.3, 12);
    CHECK(select_num_clusters(one.values, 50, 64, 10, EmConfig{}, 1).best == 1);
    std::vector<double> flat(20 * 2, 1.5);
    CHECK_THROWS_AS(select_num_clusters(flat, 20, 2, 3, EmConfig{}, 1), std::invalid_argument);
    CHECK_THROWS_AS(select_num_clusters(two.values, 50, 64, 50, EmConfig{}, 1), std::invalid_argument);
}

TEST_CASE("gmm text round trip") {
    Rng rng(5);
    const auto x = normals(60 * 2, 0.0, 1.0, rng);
    const auto fit = em_fit(x, 60, 2, 2, EmConfig{}, 3);
    const auto back = parse_gmm(serialize_gmm(fit));
    CHECK(back.means == fit.means);
    CHECK(back.aic == fit.aic);
}

TEST_CASE("value matrix: round trip, histogram and validation") {
    const auto m = synthetic_archetype_matrix(12, 3, 2, 0.1, 1);
    const auto back = parse_value_matrix(serialize_value_matrix(m));
    CHECK(back.values == m.values);
    CHECK(back.level_ids == m.level_ids);
    const auto h = histogram(m.column(0), 10);
    std::size_t total = 0;
    for (auto c : h.counts) total += c;
    CHECK(total == 12);
    auto bad = m;
    bad.values[3] = NAN;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("clustering hypothesis on gapworld oracle values") {
    const auto levels = envs::generate_level_set(envs::Family::gapworld, 1000, 50);
    const std::size_t mid = levels.front().spec.n_states / 2;
    const auto m = gapworld_oracle_matrix(levels, {mid});
    const auto rep = clustering_hypothesis_test(m, 0, 10, EmConfig{}, 1);
    CHECK(rep.prefers_multiple);
    std::size_t total = 0;
    for (auto c : rep.hist.counts) total += c;
    CHECK(total == 50);
}

TEST_CASE("exact value matrices match the linear-solve oracle") {
    const auto levels = default_tabular_set(7, 4);
    const auto pi = random_softmax(levels[0], 3);
    const std::vector<std::size_t> states{0, 2, 5};
    const auto m = exact_values(levels, [&](const envs::LevelHandle&) { return pi; }, states, "fixed");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto v = envs::solve_value_direct(levels[i].spec, pi);
        for (std::size_t k = 0; k < states.size(); ++k) CHECK(std::abs(m.at(i, k) - v[states[k]]) <= 1e-8);
    }
    const std::vector<envs::LevelHandle> twice{levels[1], levels[1]};
    const auto d = exact_values(twice, [&](const envs::LevelHandle&) { return pi; }, states, "fixed");
    for (std::size_t k = 0; k < states.size(); ++k) CHECK(d.at(0, k) == d.at(1, k));

    const models::ActorCritic net(small_net(levels[0], models::HeadKind::baseline), 4);
    const auto mp = memoryless_policy(net, levels[0]);
    mp.validate(levels[0].spec);
    const auto mm = exact_values(levels, [&](const envs::LevelHandle& l) { return memoryless_policy(net, l); }, states, "net");
    const auto v0 = envs::solve_value_direct(levels[0].spec, mp);
    CHECK(std::abs(mm.at(0, 0) - v0[0]) <= 1e-8);
}

TEST_CASE("estimate_true_values: frozen trunk, duplicate levels and divergence") {
    auto levels = envs::generate_level_set(envs::Family::gapworld, 20, 2);
    levels.push_back(levels[0]);
    const models::ActorCritic base(small_net(levels[0], models::HeadKind::dynamic), 9);
    const auto probes = sample_probes(base, levels, 16, 2, 60);
    CHECK(probes.size() == 16);
    FineTuneConfig ft;
    ft.max_steps = 120;
    ft.episodes = 8;
    ft.horizon = 60;
    const auto res = estimate_true_values(base, levels, probes, ft, 3, "base", true);
    REQUIRE(res.matrix.n_levels == 3);
    CHECK(res.excluded.empty());
    for (std::size_t k = 0; k < probes.size(); ++k) CHECK(std::abs(res.matrix.at(0, k) - res.matrix.at(2, k)) <= 1e-3);
    for (const auto& tuned : res.tuned) {
        for (const auto& name : base.policy_parameter_names()) CHECK(tuned.get(name).value == base.params().get(name).value);
    }
    bool critic_moved = false;
    for (const auto& name : base.critic_parameter_names())
        critic_moved = critic_moved || !(res.tuned[0].get(name).value == base.params().get(name).value);
    CHECK(critic_moved);

    FineTuneConfig wild = ft;
    wild.lr = 1e300;
    const auto bad = estimate_true_values(base, levels, probes, wild, 3, "base");
    CHECK(bad.excluded.size() + bad.matrix.n_levels == 3);
    CHECK_FALSE(bad.excluded.empty());
    for (auto li : bad.excluded) CHECK(std::isnan(bad.final_loss[li]));
}

TEST_CASE("variance decomposition identities") {
    const auto levels = default_tabular_set(7, 4);
    const auto pi = random_softmax(levels[0], 8);
    const auto t = exact_tables(levels, pi);
    const auto oracle = variance_decomposition(levels, pi, [&](std::size_t s, std::size_t m) { return t.v[m][s]; });
    CHECK(oracle.prediction_error == 0.0);
    CHECK(std::abs(oracle.cross_term) <= 1e-12);
    CHECK(std::abs(oracle.total - oracle.minimal) <= 1e-12);

    const double c = 0.75;
    const auto off = variance_decomposition(levels, pi, [&](std::size_t s, std::size_t m) { return t.v[m][s] + c; });
    CHECK(off.prediction_error == doctest::Approx(c * c).epsilon(1e-12));
    CHECK(std::abs(off.cross_term) <= 1e-9);

    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> table(8 * levels.size());
        for (auto& v : table) v = rng.normal(0.0, 3.0);
        const auto d = variance_decomposition(levels, pi, [&](std::size_t s, std::size_t m) { return table[m * 8 + s]; });
        CHECK(std::abs(d.total - (d.minimal + d.prediction_error + d.cross_term)) <= 1e-9);
        CHECK(std::abs(d.cross_term) <= 1e-9);
    }
    std::vector<envs::LevelHandle> gap{envs::generate_level(envs::Family::gapworld, 1)};
    CHECK_THROWS_AS(variance_decomposition(gap, envs::gapworld_reference_policy(gap[0]),
                                           [](std::size_t, std::size_t) { return 0.0; }),
                    std::invalid_argument);
}

TEST_CASE("lemma 1 and lemma 2 on the default tabular set") {
    const auto levels = default_tabular_set();
    const std::size_t S = levels[0].spec.n_states, A = levels[0].spec.n_actions;
    Rng rng(10);
    std::vector<double> theta(S * A);
    for (auto& x : theta) x = rng.normal();
    const auto zero = lemma1_check(levels, theta, [](std::size_t, std::size_t) { return 0.0; });
    CHECK(zero.max_abs_diff == 0.0);
    const auto pi = softmax_policy(S, A, theta);
    const auto t = exact_tables(levels, pi);
    CHECK(lemma1_check(levels, theta, [&](std::size_t s, std::size_t m) { return t.v[m][s]; }).passed);
    std::vector<double> table(S * levels.size());
    for (auto& v : table) v = rng.normal(0.0, 10.0);
    CHECK(lemma1_check(levels, theta, [&](std::size_t s, std::size_t m) { return table[m * S + s]; }).passed);

    const auto r2 = lemma2_sweep(levels, pi);
    CHECK(r2.best_lambda == 1.0);
    CHECK(r2.max_second_diff_dev <= 1e-9);
    CHECK(r2.objective[4] == doctest::Approx(r2.minimal_variance).epsilon(1e-12));
}

TEST_CASE("curve helpers and the variance-vs-levels experiment") {
    const auto p = summarize(3.0, {1.0, 2.0, 3.0});
    CHECK(p.mean == 2.0);
    CHECK(p.stderr_mean == doctest::Approx(1.0 / std::sqrt(3.0)));
    CHECK(curve_csv({p}).rfind("x,mean,stderr,n_seeds\n", 0) == 0);

    VarianceCurveConfig vc;
    vc.level_counts = {1, 3};
    vc.n_seeds = 2;
    vc.base.family = envs::Family::gapworld;
    vc.base.encoder_hidden = 6;
    vc.base.lstm_hidden = 5;
    vc.base.rollout = train::RolloutConfig{1, 16, 30};
    vc.base.update.bptt_len = 8;
    vc.base.update.n_minibatches = 2;
    vc.base.update.kappa_samples = 4;
    vc.base.total_steps = 64;
    const auto a = variance_vs_levels(vc, 5);
    CHECK(a.size() == 2);
    CHECK(a[0].n_seeds == 2);
    CHECK(curve_csv(a) == curve_csv(variance_vs_levels(vc, 5)));
}

TEST_CASE("confusion table stays inside [1/N_b, 1]") {
    const auto levels = envs::generate_level_set(envs::Family::gapworld, 30, 4);
    const models::ActorCritic net(small_net(levels[0], models::HeadKind::dynamic), 2);
    const auto t = confusion_table(net, levels, 6, 1, 50);
    CHECK(t.episodes.size() == 6);
    for (const auto& s : t.steps) {
        CHECK(s.delta >= 1.0 / 3.0 - 1e-12);
        CHECK(s.delta <= 1.0 + 1e-12);
    }
    const models::ActorCritic plain(small_net(levels[0], models::HeadKind::baseline), 2);
    CHECK_THROWS_AS(confusion_table(plain, levels, 2, 1, 50), std::invalid_argument);
}

TEST_CASE("prediction error oracle is finite and debiased") {
    const auto levels = envs::generate_level_set(envs::Family::gapworld, 40, 2);
    const models::ActorCritic net(small_net(levels[0], models::HeadKind::baseline), 6);
    const auto pe = prediction_error_mc(net, levels, 10, 8, 3, 60, 200);
    CHECK(pe.probes == 10);
    CHECK(std::isfinite(pe.mean_sq_error));
    CHECK(pe.mean_sq_error == doctest::Approx(pe.raw_mean_sq - pe.mean_noise));
    CHECK_THROWS_AS(prediction_error_mc(net, levels, 10, 1, 3), std::invalid_argument);
}
