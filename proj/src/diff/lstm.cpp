#include "dve/diff/lstm.hpp"

#include <cmath>
#include <stdexcept>

namespace dve::diff {

void LstmState::validate() const {
    if (hidden.size() != cell.size()) throw ShapeError("LstmState: hidden and cell lengths differ");
    for (double v : hidden)
        if (!std::isfinite(v)) throw std::invalid_argument("LstmState: non-finite hidden entry");
    for (double v : cell)
        if (!std::isfinite(v)) throw std::invalid_argument("LstmState: non-finite cell entry");
}

LstmVars lstm_step(Var x, LstmVars state, Var w, Var b, Var* gates_out) {
    const std::size_t h = state.hidden.shape().cols;
    const std::size_t d = x.shape().cols;
    if (state.cell.shape() != state.hidden.shape()) throw_shape_mismatch("lstm_step(state)", state.hidden.shape(), state.cell.shape());
    if (x.shape().rows != state.hidden.shape().rows) throw_shape_mismatch("lstm_step(x,h)", x.shape(), state.hidden.shape());
    if (w.shape() != Shape{d + h, 4 * h}) throw_shape_mismatch("lstm_step(w)", Shape{d + h, 4 * h}, w.shape());
    if (b.shape() != Shape{1, 4 * h}) throw_shape_mismatch("lstm_step(b)", Shape{1, 4 * h}, b.shape());

    Var gates = affine(concat({x, state.hidden}), w, b);
    if (gates_out) *gates_out = gates;
    Var in = sigmoid(slice_cols(gates, 0, h));
    Var forget = sigmoid(slice_cols(gates, h, 2 * h));
    Var cand = tanh(slice_cols(gates, 2 * h, 3 * h));
    Var out = sigmoid(slice_cols(gates, 3 * h, 4 * h));
    Var cell = add(mul(forget, state.cell), mul(in, cand));
    Var hidden = mul(out, tanh(cell));
    return {hidden, cell};
}

std::pair<Var, LstmState> lstm_step(Var x, const LstmState& state, Var w, Var b) {
    state.validate();
    if (x.shape().rows != 1) throw ShapeError("lstm_step: value-state form takes a single row, got " + x.shape().to_string());
    Tape& t = x.tape();
    const Shape s{1, state.size()};
    LstmVars next = lstm_step(x, LstmVars{t.constant(s, state.hidden), t.constant(s, state.cell)}, w, b);
    auto hv = next.hidden.value();
    auto cv = next.cell.value();
    return {next.hidden, LstmState{{hv.begin(), hv.end()}, {cv.begin(), cv.end()}}};
}

}  // namespace dve::diff
