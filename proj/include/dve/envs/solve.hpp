#pragma once

#include <cstddef>
#include <vector>

#include "dve/envs/mdp.hpp"

namespace dve::envs {

struct SolveInfo {
    std::size_t iterations = 0;
    double residual = 0.0;
};

/// Policy evaluation by repeated Bellman backups. Stops when both the
/// sup-norm residual and the contraction error bound gamma/(1-gamma) * residual
/// are below `tol`. V(terminal) = 0.
std::vector<double> solve_value(const MdpSpec& spec, const TabularPolicy& policy, double tol = 1e-10,
                                std::size_t max_iter = 100000, SolveInfo* info = nullptr);

/// Same fixed point via a dense LU solve of (I - gamma P_pi) V = r_pi.
std::vector<double> solve_value_direct(const MdpSpec& spec, const TabularPolicy& policy);

/// Q(s,a) = sum_s' P(s'|s,a) [r + gamma V(s')], flattened [S x A].
std::vector<double> solve_q(const MdpSpec& spec, const TabularPolicy& policy);

/// Q from a given value vector (no re-solve).
std::vector<double> q_from_value(const MdpSpec& spec, const std::vector<double>& value);

/// Discounted state-occupancy (1-gamma) sum_t gamma^t Pr(s_t = s), computed
/// by power iteration to residual `tol`. Terminal states are absorbing and
/// keep their mass.
std::vector<double> discounted_occupancy(const MdpSpec& spec, const TabularPolicy& policy, double tol = 1e-10);

/// Probability of reaching a goal state (given as a set) within `horizon`
/// steps under `policy`, starting from start_dist.
double absorption_probability(const MdpSpec& spec, const TabularPolicy& policy,
                              const std::vector<std::size_t>& goals, std::size_t horizon);

}  // namespace dve::envs
