#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "dve/envs/episode.hpp"
#include "dve/envs/level.hpp"
#include "dve/envs/metrics.hpp"
#include "dve/envs/solve.hpp"

using namespace dve;
using namespace dve::envs;

namespace {

TabularPolicy random_policy(std::size_t S, std::size_t A, Rng& rng) {
    TabularPolicy p{S, A, std::vector<double>(S * A)};
    for (std::size_t s = 0; s < S; ++s) {
        double z = 0.0;
        for (std::size_t a = 0; a < A; ++a) z += p.probs[s * A + a] = rng.uniform(0.05, 1.0);
        for (std::size_t a = 0; a < A; ++a) p.probs[s * A + a] /= z;
    }
    return p;
}

// Independent oracle: (I - gamma P_pi) V = r_pi with terminal rows pinned to 0.
std::vector<double> eigen_value(const MdpSpec& m, const TabularPolicy& pi) {
    const auto S = static_cast<Eigen::Index>(m.n_states);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(S, S);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(S);
    for (std::size_t s = 0; s < m.n_states; ++s) {
        if (m.is_terminal(s)) continue;
        for (std::size_t a = 0; a < m.n_actions; ++a)
            for (std::size_t s2 = 0; s2 < m.n_states; ++s2) {
                const double w = pi(s, a) * m.p(s, a, s2);
                A(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s2)) -= m.gamma * w;
                r(static_cast<Eigen::Index>(s)) += w * m.r(s, a, s2);
            }
    }
    Eigen::VectorXd v = A.partialPivLu().solve(r);
    return {v.data(), v.data() + v.size()};
}

MdpSpec self_loop(double gamma) {
    MdpSpec m;
    m.n_states = 1;
    m.n_actions = 1;
    m.gamma = gamma;
    m.transition = {1.0};
    m.reward = {1.0};
    m.start_dist = {1.0};
    return m;
}

}  // namespace

TEST_CASE("generate_level: determinism, row sums and archetype rule") {
    CHECK(generate_level(Family::gapworld, 42) == generate_level(Family::gapworld, 42));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto g = generate_level(Family::gapworld, seed);
        CHECK(g.archetype == static_cast<int>(seed % 2));
        const auto t = generate_level(Family::tabular, seed);
        for (std::size_t s = 0; s < t.spec.n_states; ++s)
            for (std::size_t a = 0; a < t.spec.n_actions; ++a) {
                double sum = 0.0;
                for (double p : t.spec.row(s, a)) sum += p;
                CHECK(std::abs(sum - 1.0) <= 1e-12);
            }
    }
    CHECK_THROWS_AS(parse_family("procgen"), std::invalid_argument);
}

TEST_CASE("dense gapworld levels carry more hazards than sparse ones") {
    double sparse = 0, dense = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto g = generate_level(Family::gapworld, seed);
        double hazards = 0;
        for (auto c : g.cells) hazards += c != Cell::empty;
        (g.archetype ? dense : sparse) += hazards;
    }
    CHECK(dense > 2.0 * sparse);
}

TEST_CASE("level export round trip") {
    const auto levels = generate_level_set(Family::gapworld, 7, 4);
    CHECK(import_level_set(export_level_set(levels)) == levels);
    const auto tab = generate_level(Family::tabular, 3);
    CHECK(import_level(export_level(tab)) == tab);
}

TEST_CASE("step: deterministic rows, terminal rejection and sampling frequencies") {
    const auto g = generate_level(Family::gapworld, 2);
    Rng r1(1), r2(999);
    CHECK(step(g, 0, kWalk, r1).next_state == step(g, 0, kWalk, r2).next_state);
    CHECK_THROWS_AS(step(g, g.spec.n_states - 1, kWalk, r1), std::logic_error);

    const auto t = generate_level(Family::tabular, 5);
    const std::size_t n = 100000;
    std::size_t s0 = 0;
    while (t.spec.is_terminal(s0)) ++s0;
    std::vector<double> counts(t.spec.n_states, 0.0);
    Rng rng(77);
    for (std::size_t i = 0; i < n; ++i) counts[step(t, s0, 1, rng).next_state] += 1.0;
    for (std::size_t s2 = 0; s2 < t.spec.n_states; ++s2) {
        const double p = t.spec.p(s0, 1, s2);
        const double sigma = std::sqrt(n * p * (1 - p));
        CHECK(std::abs(counts[s2] - n * p) <= 3.0 * sigma + 1e-9);
    }
}

TEST_CASE("solve_value: closed forms") {
    const auto v = solve_value(self_loop(0.9), TabularPolicy::uniform(1, 1));
    CHECK(std::abs(v[0] - 10.0) <= 1e-9);

    MdpSpec chain;
    chain.n_states = 4;
    chain.n_actions = 1;
    chain.gamma = 0.5;
    chain.transition.assign(16, 0.0);
    chain.reward.assign(16, 0.0);
    for (std::size_t s = 0; s < 3; ++s) chain.transition[chain.index(s, 0, s + 1)] = 1.0;
    chain.reward[chain.index(2, 0, 3)] = 10.0;
    chain.transition[chain.index(3, 0, 3)] = 1.0;
    chain.terminal = {3};
    chain.start_dist = {1, 0, 0, 0};
    const auto cv = solve_value(chain, TabularPolicy::uniform(4, 1));
    CHECK(cv[0] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(cv[1] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(cv[2] == doctest::Approx(10.0).epsilon(1e-12));
    const auto q = solve_q(chain, TabularPolicy::uniform(4, 1));
    CHECK(q[2] == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("solve_value matches an independent linear solve") {
    Rng rng(2024);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto lvl = generate_tabular(seed, TabularParams{6, 3, 0.9});
        const auto pi = random_policy(6, 3, rng);
        const auto v = solve_value(lvl.spec, pi);
        const auto oracle = eigen_value(lvl.spec, pi);
        for (std::size_t s = 0; s < 6; ++s) CHECK(std::abs(v[s] - oracle[s]) <= 1e-8);

        const auto q = solve_q(lvl.spec, pi);
        for (std::size_t s = 0; s < 6; ++s) {
            double e = 0.0;
            for (std::size_t a = 0; a < 3; ++a) e += pi(s, a) * q[s * 3 + a];
            CHECK(std::abs(e - v[s]) <= 1e-8);
        }
    }
    TabularPolicy bad{6, 3, std::vector<double>(18, 0.5)};
    CHECK_THROWS_AS(solve_value(generate_tabular(0, TabularParams{6, 3, 0.9}).spec, bad), std::invalid_argument);
}

TEST_CASE("solve_q with gamma 0 is the expected immediate reward") {
    auto lvl = generate_tabular(9, TabularParams{5, 2, 0.9});
    lvl.spec.gamma = 0.0;
    const auto pi = TabularPolicy::uniform(5, 2);
    const auto q = solve_q(lvl.spec, pi);
    for (std::size_t s = 0; s < 5; ++s) {
        if (lvl.spec.is_terminal(s)) continue;
        for (std::size_t a = 0; a < 2; ++a) {
            double r = 0.0;
            for (std::size_t s2 = 0; s2 < 5; ++s2) r += lvl.spec.p(s, a, s2) * lvl.spec.r(s, a, s2);
            CHECK(q[s * 2 + a] == doctest::Approx(r).epsilon(1e-12));
        }
    }
}

TEST_CASE("spl") {
    std::vector<EpisodeOutcome> fails{{false, 5, 3, 0.0}, {false, 9, 3, 0.0}};
    CHECK(spl(fails).spl == 0.0);
    std::vector<EpisodeOutcome> one{{true, 4, 4, 1.0}};
    CHECK(spl(one).spl == 1.0);
    std::vector<EpisodeOutcome> two{{true, 8, 4, 1.0}, {false, 3, 4, 0.0}};
    CHECK(spl(two).spl == doctest::Approx(0.25));
    CHECK(spl(two).success_rate == doctest::Approx(0.5));
    CHECK_THROWS_AS(spl(std::vector<EpisodeOutcome>{}), std::invalid_argument);
}

TEST_CASE("episode success rate approaches the exact absorption probability") {
    const auto lvl = generate_level(Family::gapworld, 4);
    const auto pi = TabularPolicy::uniform(lvl.spec.n_states, 2);
    const std::size_t horizon = 100;
    const double exact = absorption_probability(lvl.spec, pi, {lvl.spec.n_states - 1}, horizon);
    Rng rng(8);
    auto act = [](std::span<const double>, Rng& r) { return static_cast<std::size_t>(r.uniform_int(2)); };
    const int n = 20000;
    int wins = 0;
    for (int i = 0; i < n; ++i) wins += run_episode(lvl, act, rng, horizon).reached_goal;
    const double sigma = std::sqrt(exact * (1 - exact) / n);
    CHECK(std::abs(wins / double(n) - exact) <= 4.0 * sigma + 1e-12);
}

TEST_CASE("horizon truncation flags the last transition") {
    // Cells 0 and 1 are always empty, so one walk step cannot end the episode.
    const auto lvl = generate_level(Family::gapworld, 1);
    Rng rng(3);
    auto act = [](std::span<const double>, Rng&) { return kWalk; };
    const auto tr = run_episode(lvl, act, rng, 1);
    REQUIRE(tr.length == 1);
    CHECK(tr.transitions.back().done);
    CHECK(tr.transitions.back().truncated);
}
