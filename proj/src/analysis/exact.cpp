#include "dve/analysis/exact.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dve/envs/solve.hpp"

namespace dve::analysis {

std::vector<envs::LevelHandle> default_tabular_set(std::uint64_t seed, std::size_t count) {
    return envs::generate_level_set(envs::Family::tabular, seed, count);
}

envs::TabularPolicy softmax_policy(std::size_t n_states, std::size_t n_actions, const std::vector<double>& logits) {
    if (logits.size() != n_states * n_actions) throw std::invalid_argument("softmax_policy: logits are not S x A");
    envs::TabularPolicy p{n_states, n_actions, std::vector<double>(logits.size())};
    for (std::size_t s = 0; s < n_states; ++s) {
        const double* z = &logits[s * n_actions];
        const double m = *std::max_element(z, z + n_actions);
        double total = 0.0;
        for (std::size_t a = 0; a < n_actions; ++a) total += p.probs[s * n_actions + a] = std::exp(z[a] - m);
        for (std::size_t a = 0; a < n_actions; ++a) p.probs[s * n_actions + a] /= total;
    }
    return p;
}

namespace {

void check_tabular(const std::vector<envs::LevelHandle>& levels, const envs::TabularPolicy& policy) {
    if (levels.empty()) throw std::invalid_argument("exact analysis: empty level set");
    for (const auto& l : levels) {
        if (l.family != envs::Family::tabular) throw std::invalid_argument("exact analysis: levels must be tabular");
        policy.validate(l.spec);
    }
}

/// Normalized weights d_M(s) over non-terminal states.
std::vector<double> decision_weights(const envs::MdpSpec& spec, const std::vector<double>& occ) {
    std::vector<double> w(spec.n_states, 0.0);
    double total = 0.0;
    for (std::size_t s = 0; s < spec.n_states; ++s)
        if (!spec.is_terminal(s)) total += w[s] = occ[s];
    if (!(total > 0.0)) throw std::invalid_argument("exact analysis: policy never visits a non-terminal state");
    for (auto& v : w) v /= total;
    return w;
}

}  // namespace

ExactTables exact_tables(const std::vector<envs::LevelHandle>& levels, const envs::TabularPolicy& policy) {
    check_tabular(levels, policy);
    ExactTables t;
    const std::size_t S = policy.n_states;
    t.v_bar.assign(S, 0.0);
    for (const auto& l : levels) {
        t.v.push_back(envs::solve_value_direct(l.spec, policy));
        t.q.push_back(envs::q_from_value(l.spec, t.v.back()));
        t.occupancy.push_back(envs::discounted_occupancy(l.spec, policy));
        for (std::size_t s = 0; s < S; ++s) t.v_bar[s] += t.v.back()[s] / static_cast<double>(levels.size());
    }
    return t;
}

VarianceDecomposition variance_decomposition(const std::vector<envs::LevelHandle>& levels,
                                             const envs::TabularPolicy& policy, const Predictor& critic) {
    const ExactTables t = exact_tables(levels, policy);
    const std::size_t S = policy.n_states, A = policy.n_actions;
    const double wm = 1.0 / static_cast<double>(levels.size());
    VarianceDecomposition d;
    for (std::size_t m = 0; m < levels.size(); ++m) {
        const auto w = decision_weights(levels[m].spec, t.occupancy[m]);
        for (std::size_t s = 0; s < S; ++s) {
            if (w[s] == 0.0) continue;
            const double v = t.v[m][s];
            const double vhat = critic(s, m);
            for (std::size_t a = 0; a < A; ++a) {
                const double p = wm * w[s] * policy(s, a);
                const double q = t.q[m][s * A + a];
                d.total += p * (q - vhat) * (q - vhat);
                d.minimal += p * (q - v) * (q - v);
                d.prediction_error += p * (v - vhat) * (v - vhat);
                d.cross_term += 2.0 * p * (q - v) * (v - vhat);
            }
        }
    }
    return d;
}

Lemma1Report lemma1_check(const std::vector<envs::LevelHandle>& levels, const std::vector<double>& theta,
                          const Predictor& f) {
    if (levels.empty()) throw std::invalid_argument("lemma1_check: empty level set");
    const std::size_t S = levels.front().spec.n_states, A = levels.front().spec.n_actions;
    const auto policy = softmax_policy(S, A, theta);
    const ExactTables t = exact_tables(levels, policy);
    const double wm = 1.0 / static_cast<double>(levels.size());

    Lemma1Report rep;
    rep.grad_q.assign(S * A, 0.0);
    rep.grad_baselined.assign(S * A, 0.0);
    for (std::size_t m = 0; m < levels.size(); ++m) {
        const double scale = wm / (1.0 - levels[m].spec.gamma);
        for (std::size_t s = 0; s < S; ++s) {
            const double occ = t.occupancy[m][s];
            if (occ == 0.0 || levels[m].spec.is_terminal(s)) continue;
            const double base = f(s, m);
            for (std::size_t a = 0; a < A; ++a) {
                const double pa = policy(s, a);
                const double q = t.q[m][s * A + a];
                // d log pi(a|s) / d theta[s,b] = [a == b] - pi(b|s)
                for (std::size_t b = 0; b < A; ++b) {
                    const double score = (a == b ? 1.0 : 0.0) - policy(s, b);
                    rep.grad_q[s * A + b] += scale * occ * pa * score * q;
                    rep.grad_baselined[s * A + b] += scale * occ * pa * score * (q - base);
                }
            }
        }
    }
    for (std::size_t i = 0; i < S * A; ++i)
        rep.max_abs_diff = std::max(rep.max_abs_diff, std::abs(rep.grad_q[i] - rep.grad_baselined[i]));
    rep.passed = rep.max_abs_diff <= 1e-9;
    return rep;
}

Lemma2Report lemma2_sweep(const std::vector<envs::LevelHandle>& levels, const envs::TabularPolicy& policy,
                          std::vector<double> lambdas) {
    if (lambdas.empty()) throw std::invalid_argument("lemma2_sweep: empty lambda grid");
    const ExactTables t = exact_tables(levels, policy);
    const std::size_t S = policy.n_states, A = policy.n_actions;
    const double wm = 1.0 / static_cast<double>(levels.size());
    std::vector<std::vector<double>> weights;
    for (std::size_t m = 0; m < levels.size(); ++m) weights.push_back(decision_weights(levels[m].spec, t.occupancy[m]));

    Lemma2Report rep;
    rep.lambdas = lambdas;
    for (double lam : lambdas) {
        double e = 0.0;
        for (std::size_t m = 0; m < levels.size(); ++m) {
            for (std::size_t s = 0; s < S; ++s) {
                if (weights[m][s] == 0.0) continue;
                const double f = lam * t.v[m][s] + (1.0 - lam) * t.v_bar[s];
                for (std::size_t a = 0; a < A; ++a) {
                    const double psi = t.q[m][s * A + a] - f;
                    e += wm * weights[m][s] * policy(s, a) * psi * psi;
                }
            }
        }
        rep.objective.push_back(e);
    }
    rep.best_lambda = lambdas[static_cast<std::size_t>(
        std::min_element(rep.objective.begin(), rep.objective.end()) - rep.objective.begin())];
    if (lambdas.size() >= 3) {
        std::vector<double> second;
        for (std::size_t i = 1; i + 1 < lambdas.size(); ++i)
            second.push_back(rep.objective[i + 1] - 2.0 * rep.objective[i] + rep.objective[i - 1]);
        const auto [lo, hi] = std::minmax_element(second.begin(), second.end());
        rep.max_second_diff_dev = *hi - *lo;
    }
    rep.minimal_variance = variance_decomposition(levels, policy, [&](std::size_t s, std::size_t m) {
                               return t.v[m][s];
                           }).minimal;
    return rep;
}

}  // namespace dve::analysis
