#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "dve/envs/level.hpp"

namespace dve::analysis {

/// Default tabular multi-MDP set used by the exact checks.
std::vector<envs::LevelHandle> default_tabular_set(std::uint64_t seed = 7, std::size_t count = 4);

/// Row-wise softmax of a logit table [S x A].
envs::TabularPolicy softmax_policy(std::size_t n_states, std::size_t n_actions, const std::vector<double>& logits);

/// Exact per-level quantities under one shared policy. Levels must share
/// state and action counts.
struct ExactTables {
    std::vector<std::vector<double>> v;          // [M][S]
    std::vector<std::vector<double>> q;          // [M][S*A]
    std::vector<std::vector<double>> occupancy;  // [M][S], discounted, normalized
    std::vector<double> v_bar;                   // [S], level-averaged V
};

ExactTables exact_tables(const std::vector<envs::LevelHandle>& levels, const envs::TabularPolicy& policy);

/// Value predictor over (state, level index).
using Predictor = std::function<double(std::size_t state, std::size_t level)>;

struct VarianceDecomposition {
    double total = 0.0;             // E[(Q - Vhat)^2]
    double minimal = 0.0;           // E[(Q - V)^2]
    double prediction_error = 0.0;  // E[(V - Vhat)^2]
    double cross_term = 0.0;        // 2 E[(Q - V)(V - Vhat)]
};

/// Expectations over (M, s, a) with weight (1/|M|) d_M(s) pi(a|s) on
/// non-terminal states, d_M renormalized over them. Rejects non-tabular
/// levels.
VarianceDecomposition variance_decomposition(const std::vector<envs::LevelHandle>& levels,
                                             const envs::TabularPolicy& policy, const Predictor& critic);

struct Lemma1Report {
    std::vector<double> grad_q;          // [S x A], psi = Q
    std::vector<double> grad_baselined;  // [S x A], psi = Q - f
    double max_abs_diff = 0.0;
    bool passed = false;  // max_abs_diff <= 1e-9
};

/// Exact policy gradient of the level-averaged objective for a tabular
/// softmax policy with logits `theta` [S x A]:
/// sum_M (1/|M|) sum_s d_M(s)/(1-gamma) sum_a pi(a|s) d log pi(a|s) psi(s,a,M).
Lemma1Report lemma1_check(const std::vector<envs::LevelHandle>& levels, const std::vector<double>& theta,
                          const Predictor& f);

struct Lemma2Report {
    std::vector<double> lambdas;
    std::vector<double> objective;  // E[psi^2] with psi = Q - f_lambda
    double best_lambda = 0.0;
    double max_second_diff_dev = 0.0;  // spread of second differences over the grid
    double minimal_variance = 0.0;     // E[(Q - V)^2]
};

/// f_lambda = lambda V(s,M) + (1 - lambda) Vbar(s) over the given grid
/// (default 0, 0.25, ..., 1.25), with the same weighting as
/// variance_decomposition.
Lemma2Report lemma2_sweep(const std::vector<envs::LevelHandle>& levels, const envs::TabularPolicy& policy,
                          std::vector<double> lambdas = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25});

}  // namespace dve::analysis
