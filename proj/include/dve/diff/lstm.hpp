#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "dve/diff/tape.hpp"

namespace dve::diff {

/// Recurrent state carried between steps. hidden and cell have equal length.
struct LstmState {
    std::vector<double> hidden;
    std::vector<double> cell;

    static LstmState zeros(std::size_t h) { return {std::vector<double>(h, 0.0), std::vector<double>(h, 0.0)}; }
    std::size_t size() const noexcept { return hidden.size(); }
    /// Throws if lengths differ or any entry is non-finite.
    void validate() const;
    friend bool operator==(const LstmState&, const LstmState&) = default;
};

/// Batched recurrent state on a tape: [rows x H] each.
struct LstmVars {
    Var hidden;
    Var cell;
};

/// One LSTM cell update. x is [B x D], w is [(D + H) x 4H] with gate column
/// blocks ordered input, forget, candidate, output; b is [1 x 4H].
/// `gates_out`, when given, receives the pre-activation gate node.
LstmVars lstm_step(Var x, LstmVars state, Var w, Var b, Var* gates_out = nullptr);

/// Single-row convenience over value states. Returns the new hidden node and
/// the new state's values (hidden equals the returned node's value).
std::pair<Var, LstmState> lstm_step(Var x, const LstmState& state, Var w, Var b);

}  // namespace dve::diff
