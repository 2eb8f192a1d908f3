#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dve/rng.hpp"

namespace dve::envs {

/// A single scene's MDP in tabular form. Arrays are indexed [s][a][s'].
struct MdpSpec {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> transition;
    std::vector<double> reward;
    double gamma = 0.9;
    std::vector<std::size_t> terminal;  // sorted, unique
    std::vector<double> start_dist;

    std::size_t index(std::size_t s, std::size_t a, std::size_t s2) const noexcept {
        return (s * n_actions + a) * n_states + s2;
    }
    double p(std::size_t s, std::size_t a, std::size_t s2) const { return transition[index(s, a, s2)]; }
    double r(std::size_t s, std::size_t a, std::size_t s2) const { return reward[index(s, a, s2)]; }
    std::span<const double> row(std::size_t s, std::size_t a) const {
        return std::span<const double>(transition).subspan(index(s, a, 0), n_states);
    }
    bool is_terminal(std::size_t s) const;

    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;

    friend bool operator==(const MdpSpec&, const MdpSpec&) = default;
};

/// Explicit stochastic policy, rows indexed by state.
struct TabularPolicy {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> probs;

    static TabularPolicy uniform(std::size_t s, std::size_t a);
    double operator()(std::size_t s, std::size_t a) const { return probs[s * n_actions + a]; }
    std::span<const double> row(std::size_t s) const {
        return std::span<const double>(probs).subspan(s * n_actions, n_actions);
    }
    /// Rejects rows that are not probability vectors (tolerance 1e-9).
    void validate(const MdpSpec& spec) const;
};

struct Transition {
    std::vector<double> obs;
    std::size_t action = 0;
    double reward = 0.0;
    std::vector<double> next_obs;
    bool done = false;        // terminal absorption or horizon
    bool truncated = false;   // done because of the horizon only
};

}  // namespace dve::envs
