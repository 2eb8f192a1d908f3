#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dve/diff/lstm.hpp"
#include "dve/diff/params.hpp"
#include "dve/diff/tape.hpp"

namespace dve::models {

enum class HeadKind { baseline, dynamic, control };

const char* head_name(HeadKind h) noexcept;
HeadKind parse_head(const std::string& name);

struct NetConfig {
    std::size_t obs_dim = 1;
    std::size_t n_actions = 1;
    std::size_t encoder_hidden = 64;
    std::size_t lstm_hidden = 64;
    HeadKind head = HeadKind::baseline;
    std::size_t n_basis = 4;    // dynamic head
    std::size_t n_control = 8;  // control head hidden width

    void validate() const;
    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Parameter counts of the two parameterized critic heads over H features.
std::size_t dynamic_head_parameter_count(std::size_t lstm_hidden, std::size_t n_basis);
std::size_t control_head_parameter_count(std::size_t lstm_hidden, std::size_t n_control);

/// Value-level critic result for a single row.
struct CriticOutput {
    double value = 0.0;
    std::optional<std::vector<double>> alpha;
    std::optional<std::vector<double>> mu;
};

/// Value-level policy result for a single row.
struct PolicyOutput {
    std::vector<double> logits;
    std::vector<double> log_probs;
};

/// Actor-critic parameters: shared tanh-MLP encoder feeding an LSTM trunk,
/// an affine actor head, and one of three critic heads.
class ActorCritic {
public:
    ActorCritic(const NetConfig& cfg, std::uint64_t seed);
    /// Adopts existing parameters (checkpoint load). Names and shapes must
    /// match the layout `cfg` implies.
    ActorCritic(const NetConfig& cfg, diff::ParamStore params);

    const NetConfig& config() const noexcept { return cfg_; }
    diff::ParamStore& params() noexcept { return params_; }
    const diff::ParamStore& params() const noexcept { return params_; }

    std::vector<std::string> trunk_parameter_names() const;
    std::vector<std::string> actor_parameter_names() const;
    std::vector<std::string> critic_parameter_names() const;
    /// Everything the policy depends on: trunk + actor.
    std::vector<std::string> policy_parameter_names() const;

    /// Builds the parameter layout for `cfg` with zero values.
    static diff::ParamStore make_layout(const NetConfig& cfg);

private:
    NetConfig cfg_;
    diff::ParamStore params_;
};

/// Binds parameters onto one tape. Names in `trainable` become gradient
/// leaves (when the tape tracks gradients); every other parameter is a
/// frozen reference. An empty set means "all trainable".
class Binder {
public:
    Binder(diff::Tape& tape, diff::ParamStore& params, std::set<std::string> trainable = {});
    /// Read-only binding; nothing receives gradient.
    Binder(diff::Tape& tape, const diff::ParamStore& params);

    diff::Tape& tape() noexcept { return *tape_; }
    diff::Var operator()(const std::string& name);

private:
    diff::Tape* tape_;
    diff::ParamStore* mutable_ = nullptr;
    const diff::ParamStore* const_;
    std::set<std::string> trainable_;
    std::vector<std::optional<diff::Var>> cache_;
    std::vector<std::string> names_;
};

struct CriticVars {
    diff::Var value;  // [B x 1]
    diff::Var alpha;  // [B x N_b] (dynamic only)
    diff::Var mu;     // [B x N_b] (dynamic only)
};

struct PolicyVars {
    diff::Var logits;     // [B x A]
    diff::Var log_probs;  // [B x A]
};

/// Intermediate nodes of one encode call.
struct EncodeTrace {
    diff::Var encoder_pre;  // affine(obs) before tanh
    diff::Var encoder_out;  // LSTM input
    diff::Var gates;        // LSTM pre-activation gates
};

/// features = lstm(tanh(affine(obs))). Returns the new state; its hidden
/// node is the feature vector both heads consume.
diff::LstmVars encode(Binder& bind, diff::Var obs, diff::LstmVars state, EncodeTrace* trace = nullptr);
PolicyVars actor_forward(Binder& bind, diff::Var features);
CriticVars critic_forward_baseline(Binder& bind, diff::Var features);
/// alpha = softmax(affine_alpha(features)), mu = affine_mu(features),
/// value = sum_i alpha_i mu_i.
CriticVars critic_forward_dynamic(Binder& bind, diff::Var features);
/// value = affine2(relu(affine1(features))).
CriticVars critic_forward_control(Binder& bind, diff::Var features);
/// Dispatches on the configured head. Calling a specific head function with
/// a mismatched configuration throws.
CriticVars critic_forward(Binder& bind, const NetConfig& cfg, diff::Var features);

/// Value-level single-row inference used by rollouts and evaluation.
struct StepOutput {
    PolicyOutput policy;
    CriticOutput critic;
    diff::LstmState next_state;
};

StepOutput infer_step(const ActorCritic& net, std::span<const double> obs, const diff::LstmState& state);

/// Value-level wrappers over a single row.
std::pair<std::vector<double>, diff::LstmState> encode_values(const ActorCritic& net, std::span<const double> obs,
                                                              const diff::LstmState& state);
PolicyOutput actor_values(const ActorCritic& net, std::span<const double> features);
CriticOutput critic_values(const ActorCritic& net, std::span<const double> features);

PolicyOutput policy_row(const PolicyVars& p, std::size_t row);
CriticOutput critic_row(const CriticVars& c, std::size_t row);

}  // namespace dve::models
