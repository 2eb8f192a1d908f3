#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "dve/diff/params.hpp"
#include "dve/diff/tensor.hpp"

namespace dve::diff {

using NodeId = std::uint32_t;

enum class OpKind : std::uint8_t {
    constant,
    parameter,
    add,
    sub,
    mul,
    matmul,
    affine,
    tanh,
    sigmoid,
    relu,
    exp,
    log,
    square,
    scale,
    add_scalar,
    concat,
    slice,
    softmax,
    log_softmax,
    sum,
    row_sum,
    pick,
    minimum,
    clamp,
    custom,
};

const char* op_name(OpKind kind) noexcept;

/// Operation tag plus the parent references the backward pass walks.
struct OpRecord {
    OpKind kind = OpKind::constant;
    std::vector<NodeId> parents;
    double a = 0.0;  // scale factor, clamp lower bound, slice begin
    double b = 0.0;  // clamp upper bound
    std::vector<std::size_t> indices;  // pick targets
    std::size_t custom = 0;
};

/// One vertex of the computation graph. Parameter leaves alias the value and
/// gradient of a Parameter; frozen references alias an external tensor and
/// carry no gradient.
struct DiffNode {
    NodeId id = 0;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    OpRecord op;
    bool requires_grad = false;
    Parameter* param = nullptr;
    const Tensor* external = nullptr;
};

/// Elementwise unary operation supplied by the caller, with its derivative.
struct CustomUnary {
    std::string name;
    std::function<double(double)> f;
    std::function<double(double)> df;
};

class Tape;

/// Lightweight handle to a node on a tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

    Tape& tape() const { return *tape_; }
    NodeId id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

    const Shape& shape() const;
    std::span<const double> value() const;
    std::span<const double> grad() const;
    double scalar() const;
    double at(std::size_t r, std::size_t c) const;
    Tensor value_tensor() const;

private:
    Tape* tape_ = nullptr;
    NodeId id_ = 0;
};

/// Tape-based reverse-mode engine. The graph is append-only: nodes are
/// created in topological order and never mutated after recording.
class Tape {
public:
    explicit Tape(bool track_grad = true) : track_grad_(track_grad) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool tracking() const noexcept { return track_grad_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    void clear();

    Var constant(Tensor value);
    Var constant(Shape shape, std::span<const double> values);
    Var scalar(double v) { return constant(Tensor(Shape{1, 1}, v)); }
    /// Leaf whose gradient accumulates into p.grad.
    Var parameter(Parameter& p);
    /// Leaf aliasing an external tensor; never receives gradient.
    Var reference(const Tensor& t);

    const DiffNode& node(NodeId id) const { return nodes_.at(id); }
    std::span<const double> value(NodeId id) const;
    std::span<const double> grad(NodeId id) const;

    /// Accumulates d(root)/d(node) into every reachable node's grad.
    void backward(Var root);

    // Used by the op constructors in ops.
    Var record(Shape shape, std::vector<double> value, OpRecord op);
    std::size_t add_custom(CustomUnary op);
    const CustomUnary& custom(std::size_t i) const { return customs_.at(i); }

private:
    void propagate(const DiffNode& n, std::span<const double> g, std::vector<std::vector<double>>& adj);

    bool track_grad_;
    std::vector<DiffNode> nodes_;
    std::vector<CustomUnary> customs_;
};

// ---- operations -----------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a[m x k] * b[k x n]
Var matmul(Var a, Var b);
/// x[m x k] * w[k x n] + bias[1 x n] broadcast over rows.
Var affine(Var x, Var w, Var bias);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
/// Concatenates along columns; all inputs share the row count.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
/// Columns [begin, end).
Var slice_cols(Var a, std::size_t begin, std::size_t end);
/// Row-wise softmax with max subtraction. Rejects non-finite logits.
Var softmax(Var logits);
Var log_softmax(Var logits);
/// Sum of all entries -> [1 x 1].
Var sum(Var a);
Var mean(Var a);
/// Per-row sum -> [rows x 1].
Var row_sum(Var a);
/// out[i] = a[i, idx[i]] -> [rows x 1].
Var pick(Var a, std::span<const std::size_t> idx);
Var minimum(Var a, Var b);
Var clamp(Var a, double lo, double hi);
Var custom_unary(Var a, CustomUnary op);

/// Dispatcher over the core operation set; shape rules as for the named ops.
Var forward_op(OpKind kind, std::span<const Var> inputs);

}  // namespace dve::diff
