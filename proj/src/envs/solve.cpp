#include "dve/envs/solve.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dve::envs {

namespace {

/// Expected immediate reward and transition matrix under the policy, with
/// terminal rows zeroed so V(terminal) stays 0.
void policy_chain(const MdpSpec& spec, const TabularPolicy& policy, std::vector<double>& r_pi,
                  std::vector<double>& p_pi) {
    const std::size_t S = spec.n_states, A = spec.n_actions;
    r_pi.assign(S, 0.0);
    p_pi.assign(S * S, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        if (spec.is_terminal(s)) continue;
        for (std::size_t a = 0; a < A; ++a) {
            const double pa = policy(s, a);
            if (pa == 0.0) continue;
            for (std::size_t s2 = 0; s2 < S; ++s2) {
                const double pr = spec.p(s, a, s2);
                r_pi[s] += pa * pr * spec.r(s, a, s2);
                p_pi[s * S + s2] += pa * pr;
            }
        }
    }
}

}  // namespace

std::vector<double> solve_value(const MdpSpec& spec, const TabularPolicy& policy, double tol, std::size_t max_iter,
                                SolveInfo* info) {
    policy.validate(spec);
    const std::size_t S = spec.n_states;
    std::vector<double> r_pi, p_pi;
    policy_chain(spec, policy, r_pi, p_pi);
    std::vector<double> v(S, 0.0), next(S);
    double residual = 0.0;
    std::size_t it = 0;
    while (it < max_iter) {
        ++it;
        residual = 0.0;
        for (std::size_t s = 0; s < S; ++s) {
            double acc = r_pi[s];
            for (std::size_t s2 = 0; s2 < S; ++s2) acc += spec.gamma * p_pi[s * S + s2] * v[s2];
            next[s] = acc;
            residual = std::max(residual, std::abs(acc - v[s]));
        }
        v.swap(next);
        // Stop once the contraction bound on the remaining error is below tol.
        if (residual < tol && residual * spec.gamma / (1.0 - spec.gamma) < tol) break;
    }
    if (residual >= tol) throw std::runtime_error("solve_value: no convergence within iteration budget");
    if (info) *info = SolveInfo{it, residual};
    return v;
}

std::vector<double> solve_value_direct(const MdpSpec& spec, const TabularPolicy& policy) {
    policy.validate(spec);
    const std::size_t S = spec.n_states;
    std::vector<double> r_pi, p_pi;
    policy_chain(spec, policy, r_pi, p_pi);
    const auto n = static_cast<Eigen::Index>(S);
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        rhs(i) = r_pi[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) -= spec.gamma * p_pi[static_cast<std::size_t>(i) * S + static_cast<std::size_t>(j)];
    }
    Eigen::VectorXd v = m.partialPivLu().solve(rhs);
    return std::vector<double>(v.data(), v.data() + n);
}

std::vector<double> q_from_value(const MdpSpec& spec, const std::vector<double>& value) {
    const std::size_t S = spec.n_states, A = spec.n_actions;
    std::vector<double> q(S * A, 0.0);
    for (std::size_t s = 0; s < S; ++s) {
        if (spec.is_terminal(s)) continue;
        for (std::size_t a = 0; a < A; ++a) {
            double acc = 0.0;
            for (std::size_t s2 = 0; s2 < S; ++s2) acc += spec.p(s, a, s2) * (spec.r(s, a, s2) + spec.gamma * value[s2]);
            q[s * A + a] = acc;
        }
    }
    return q;
}

std::vector<double> solve_q(const MdpSpec& spec, const TabularPolicy& policy) {
    return q_from_value(spec, solve_value(spec, policy));
}

std::vector<double> discounted_occupancy(const MdpSpec& spec, const TabularPolicy& policy, double tol) {
    policy.validate(spec);
    const std::size_t S = spec.n_states, A = spec.n_actions;
    // Full chain including terminal self-loops.
    std::vector<double> p_pi(S * S, 0.0);
    for (std::size_t s = 0; s < S; ++s)
        for (std::size_t a = 0; a < A; ++a)
            for (std::size_t s2 = 0; s2 < S; ++s2) p_pi[s * S + s2] += policy(s, a) * spec.p(s, a, s2);

    const double g = spec.gamma;
    std::vector<double> d(S), next(S);
    for (std::size_t s = 0; s < S; ++s) d[s] = (1.0 - g) * spec.start_dist[s];
    for (std::size_t it = 0; it < 1000000; ++it) {
        double residual = 0.0;
        for (std::size_t s2 = 0; s2 < S; ++s2) {
            double acc = (1.0 - g) * spec.start_dist[s2];
            for (std::size_t s = 0; s < S; ++s) acc += g * p_pi[s * S + s2] * d[s];
            next[s2] = acc;
            residual = std::max(residual, std::abs(acc - d[s2]));
        }
        d.swap(next);
        if (residual < tol) return d;
    }
    throw std::runtime_error("discounted_occupancy: no convergence");
}

double absorption_probability(const MdpSpec& spec, const TabularPolicy& policy, const std::vector<std::size_t>& goals,
                              std::size_t horizon) {
    policy.validate(spec);
    const std::size_t S = spec.n_states, A = spec.n_actions;
    // reach[s] = probability of hitting a goal within k remaining steps.
    std::vector<double> reach(S, 0.0), next(S);
    auto is_goal = [&](std::size_t s) { return std::find(goals.begin(), goals.end(), s) != goals.end(); };
    for (std::size_t s = 0; s < S; ++s) reach[s] = is_goal(s) ? 1.0 : 0.0;
    for (std::size_t k = 0; k < horizon; ++k) {
        for (std::size_t s = 0; s < S; ++s) {
            if (is_goal(s)) {
                next[s] = 1.0;
                continue;
            }
            if (spec.is_terminal(s)) {
                next[s] = 0.0;
                continue;
            }
            double acc = 0.0;
            for (std::size_t a = 0; a < A; ++a)
                for (std::size_t s2 = 0; s2 < S; ++s2) acc += policy(s, a) * spec.p(s, a, s2) * reach[s2];
            next[s] = acc;
        }
        reach.swap(next);
    }
    double total = 0.0;
    for (std::size_t s = 0; s < S; ++s) total += spec.start_dist[s] * reach[s];
    return total;
}

}  // namespace dve::envs
