#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dve/envs/mdp.hpp"
#include "dve/rng.hpp"

namespace dve::envs {

enum class Family { tabular, gapworld };

const char* family_name(Family f) noexcept;
/// Throws std::invalid_argument for unknown names.
Family parse_family(const std::string& name);

enum class Cell : std::uint8_t { empty = 0, gap = 1, obstacle = 2 };

/// Gapworld actions.
inline constexpr std::size_t kWalk = 0;
inline constexpr std::size_t kJump = 1;

/// Knobs of the two procedural families. Defaults are the documented ones.
struct GapworldParams {
    std::size_t length = 24;
    double sparse_density = 0.1;
    double dense_density = 0.3;
    double slip_mean = 0.2;
    double slip_stddev = 0.05;
    double goal_reward = 10.0;
    double step_reward = -0.1;
    double gamma = 0.99;
    static constexpr std::size_t kWindowRadius = 3;
};

struct TabularParams {
    std::size_t n_states = 8;
    std::size_t n_actions = 3;
    double gamma = 0.9;
};

/// One scene of a multiple-MDP environment. Generation is a pure function of
/// (family, seed); the materialized spec is immutable afterwards.
struct LevelHandle {
    Family family = Family::tabular;
    std::uint64_t seed = 0;
    int archetype = 0;  // gapworld: 0 sparse, 1 dense; tabular: 0
    MdpSpec spec;

    // Gapworld layout; empty for tabular levels.
    std::vector<Cell> cells;
    double jump_slip = 0.0;

    std::size_t obs_dim() const;
    std::size_t n_actions() const { return spec.n_actions; }
    /// Observation of a state. Tabular: one-hot state. Gapworld: cell-type
    /// window of radius 3 (gap, obstacle, off-grid flags per cell) followed by
    /// the normalized position.
    std::vector<double> observe(std::size_t state) const;
    std::size_t sample_start(Rng& rng) const;
    /// Gapworld: fewest steps from start to goal with successful jumps.
    std::size_t optimal_path_length() const;
    /// Gapworld: whether `state` is the goal cell.
    bool is_goal(std::size_t state) const;

    friend bool operator==(const LevelHandle&, const LevelHandle&) = default;
};

LevelHandle generate_level(Family family, std::uint64_t seed);
LevelHandle generate_gapworld(std::uint64_t seed, const GapworldParams& params);
LevelHandle generate_tabular(std::uint64_t seed, const TabularParams& params);
/// Wraps an explicit spec as a tabular-family level.
LevelHandle level_from_spec(MdpSpec spec, std::uint64_t seed = 0);

/// Consecutive seeds base, base+1, ...; for gapworld this alternates archetypes.
std::vector<LevelHandle> generate_level_set(Family family, std::uint64_t base_seed, std::size_t count);

struct StepResult {
    Transition transition;
    std::size_t next_state = 0;
};

/// Samples s' ~ P(.|s,a). Rejects terminal or out-of-range states.
StepResult step(const LevelHandle& level, std::size_t state, std::size_t action, Rng& rng);

/// Hand-written hazard-aware stochastic policy on a gapworld level: jumps
/// with probability 0.8 when the next cell is a hazard, walks with
/// probability 0.9 when the cell after next is a gap, otherwise walks with
/// probability 0.7. Markov in the position, so Bellman solvers apply.
TabularPolicy gapworld_reference_policy(const LevelHandle& level);

/// Structured-text export. Gapworld levels are regenerated from the seed on
/// import and checked against the recorded archetype; tabular levels carry
/// their full arrays in hexadecimal floating point.
std::string export_level(const LevelHandle& level);
LevelHandle import_level(const std::string& text);

std::string export_level_set(const std::vector<LevelHandle>& levels);
std::vector<LevelHandle> import_level_set(const std::string& text);

}  // namespace dve::envs
