#include "dve/diff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dve::diff {

const char* op_name(OpKind kind) noexcept {
    switch (kind) {
        case OpKind::constant: return "constant";
        case OpKind::parameter: return "parameter";
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::mul: return "mul";
        case OpKind::matmul: return "matmul";
        case OpKind::affine: return "affine";
        case OpKind::tanh: return "tanh";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::relu: return "relu";
        case OpKind::exp: return "exp";
        case OpKind::log: return "log";
        case OpKind::square: return "square";
        case OpKind::scale: return "scale";
        case OpKind::add_scalar: return "add_scalar";
        case OpKind::concat: return "concat";
        case OpKind::slice: return "slice";
        case OpKind::softmax: return "softmax";
        case OpKind::log_softmax: return "log_softmax";
        case OpKind::sum: return "sum";
        case OpKind::row_sum: return "row_sum";
        case OpKind::pick: return "pick";
        case OpKind::minimum: return "minimum";
        case OpKind::clamp: return "clamp";
        case OpKind::custom: return "custom";
    }
    return "?";
}

// ---- Var ------------------------------------------------------------------

const Shape& Var::shape() const { return tape_->node(id_).shape; }
std::span<const double> Var::value() const { return tape_->value(id_); }
std::span<const double> Var::grad() const { return tape_->grad(id_); }

double Var::scalar() const {
    if (shape().size() != 1) throw ShapeError("scalar(): node has shape " + shape().to_string());
    return value()[0];
}

double Var::at(std::size_t r, std::size_t c) const { return value()[r * shape().cols + c]; }

Tensor Var::value_tensor() const {
    auto v = value();
    return Tensor(shape(), std::vector<double>(v.begin(), v.end()));
}

// ---- Tape -----------------------------------------------------------------

void Tape::clear() {
    nodes_.clear();
    customs_.clear();
}

std::span<const double> Tape::value(NodeId id) const {
    const auto& n = nodes_.at(id);
    if (n.param) return n.param->value.data();
    if (n.external) return n.external->data();
    return n.value;
}

std::span<const double> Tape::grad(NodeId id) const {
    const auto& n = nodes_.at(id);
    if (!track_grad_) throw std::logic_error("grad(): tape does not track gradients");
    if (n.param) return n.param->grad.data();
    return n.grad;
}

Var Tape::record(Shape shape, std::vector<double> value, OpRecord op) {
    DiffNode n;
    n.id = static_cast<NodeId>(nodes_.size());
    n.shape = shape;
    n.value = std::move(value);
    if (track_grad_) {
        for (NodeId p : op.parents) {
            if (nodes_[p].requires_grad) {
                n.requires_grad = true;
                break;
            }
        }
        n.grad.assign(shape.size(), 0.0);
    }
    n.op = std::move(op);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.back().id);
}

Var Tape::constant(Tensor value) {
    const Shape s = value.shape();
    return record(s, std::move(value.storage()), OpRecord{});
}

Var Tape::constant(Shape shape, std::span<const double> values) {
    if (values.size() != shape.size()) throw ShapeError("constant: value count does not match " + shape.to_string());
    return record(shape, std::vector<double>(values.begin(), values.end()), OpRecord{});
}

Var Tape::parameter(Parameter& p) {
    DiffNode n;
    n.id = static_cast<NodeId>(nodes_.size());
    n.shape = p.value.shape();
    n.op.kind = OpKind::parameter;
    if (track_grad_) {
        n.param = &p;
        n.requires_grad = true;
    } else {
        n.external = &p.value;
    }
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.back().id);
}

Var Tape::reference(const Tensor& t) {
    DiffNode n;
    n.id = static_cast<NodeId>(nodes_.size());
    n.shape = t.shape();
    n.external = &t;
    if (track_grad_) n.grad.assign(t.size(), 0.0);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.back().id);
}

std::size_t Tape::add_custom(CustomUnary op) {
    customs_.push_back(std::move(op));
    return customs_.size() - 1;
}

void Tape::backward(Var root) {
    if (!track_grad_) throw std::logic_error("backward(): tape does not track gradients");
    if (&root.tape() != this) throw std::invalid_argument("backward(): root belongs to another tape");
    const auto& r = nodes_.at(root.id());
    if (r.shape.size() != 1) throw ShapeError("backward(): root must be scalar, got " + r.shape.to_string());

    // Adjoints for this call only, so repeated calls add exactly one more
    // copy of d(root)/d(node) to each persistent grad.
    std::vector<std::vector<double>> adj(root.id() + 1);
    adj[root.id()].assign(1, 1.0);
    for (std::size_t i = root.id() + 1; i-- > 0;) {
        auto& g = adj[i];
        if (g.empty()) continue;
        auto& n = nodes_[i];
        propagate(n, g, adj);
        if (n.param) {
            auto dst = n.param->grad.data();
            for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
        } else {
            for (std::size_t k = 0; k < g.size(); ++k) n.grad[k] += g[k];
        }
        std::vector<double>().swap(g);
    }
}

namespace {

std::vector<double>& slot(std::vector<std::vector<double>>& adj, const std::vector<DiffNode>& nodes, NodeId id) {
    auto& g = adj[id];
    if (g.empty()) g.assign(nodes[id].shape.size(), 0.0);
    return g;
}

}  // namespace

void Tape::propagate(const DiffNode& n, std::span<const double> g, std::vector<std::vector<double>>& adj) {
    const auto& op = n.op;
    auto needs = [&](std::size_t k) { return nodes_[op.parents[k]].requires_grad; };
    auto pv = [&](std::size_t k) { return value(op.parents[k]); };
    auto pg = [&](std::size_t k) -> std::vector<double>& { return slot(adj, nodes_, op.parents[k]); };
    const auto y = value(n.id);
    const std::size_t sz = g.size();

    switch (op.kind) {
        case OpKind::constant:
        case OpKind::parameter:
            return;
        case OpKind::add:
            for (std::size_t k = 0; k < 2; ++k) {
                if (!needs(k)) continue;
                auto& d = pg(k);
                for (std::size_t i = 0; i < sz; ++i) d[i] += g[i];
            }
            return;
        case OpKind::sub:
            if (needs(0)) {
                auto& d = pg(0);
                for (std::size_t i = 0; i < sz; ++i) d[i] += g[i];
            }
            if (needs(1)) {
                auto& d = pg(1);
                for (std::size_t i = 0; i < sz; ++i) d[i] -= g[i];
            }
            return;
        case OpKind::mul: {
            auto a = pv(0), b = pv(1);
            if (needs(0)) {
                auto& d = pg(0);
                for (std::size_t i = 0; i < sz; ++i) d[i] += g[i] * b[i];
            }
            if (needs(1)) {
                auto& d = pg(1);
                for (std::size_t i = 0; i < sz; ++i) d[i] += g[i] * a[i];
            }
            return;
        }
        case OpKind::matmul:
        case OpKind::affine: {
            const Shape& sa = nodes_[op.parents[0]].shape;
            const Shape& sb = nodes_[op.parents[1]].shape;
            const std::size_t m = sa.rows, kk = sa.cols, nn = sb.cols;
            auto a = pv(0), b = pv(1);
            if (needs(0)) {
                // dA = G * B^T, as row updates against a transposed B.
                auto& d = pg(0);
                std::vector<double> bt(kk * nn);
                for (std::size_t p = 0; p < kk; ++p)
                    for (std::size_t j = 0; j < nn; ++j) bt[j * kk + p] = b[p * nn + j];
                gemm_accumulate(g, bt, d, m, nn, kk);
            }
            if (needs(1)) {
                // dB = A^T * G
                auto& d = pg(1);
                for (std::size_t i = 0; i < m; ++i) {
                    const double* grow = g.data() + i * nn;
                    for (std::size_t p = 0; p < kk; ++p) {
                        const double av = a[i * kk + p];
                        if (av == 0.0) continue;
                        double* drow = d.data() + p * nn;
                        for (std::size_t j = 0; j < nn; ++j) drow[j] += av * grow[j];
                    }
                }
            }
            if (op.kind == OpKind::affine && needs(2)) {
                auto& d = pg(2);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < nn; ++j) d[j] += g[i * nn + j];
            }
            return;
        }
        case OpKind::tanh: {
            if (!needs(0)) return;
            auto& d = pg(0);
            for (std::size_t i = 0; i < sz; ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
            return;
        }
        case OpKind::sigmoid: {
            if (!needs(0)) return;
            auto& d = pg(0);
            for (std::size_t i = 0; i < sz; ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
            return;
        }
        case OpKind::relu: {
            if (!needs(0)) return;
            auto x = pv(0);
            auto& d = pg(0);
            for (std::size_t i = 0; i < sz; ++i)
                if (x[i] > 0.0) d[i] += g[i];
            return;
        }
        case OpKind::exp: {
            if (!needs(0)) return;
            auto& d = pg(0);
            for (std::size_t i = 0; i < sz; ++i) d[i] += g[i] * y[i];
            return;
        }
        case OpKind::log: {
            if (!needs(0)) return;
            auto x = pv(0);
            auto& d = pg(0);
            for (std::size_t i = 0; i < sz; ++i) d[i] += g[i] / x[i];
            return;
        }
        case OpKind::square: {
            if (!needs(0)) return;
            auto x = pv(0);
            auto& d = pg(0);
            for (std::size_t i = 0; i < sz; ++i) d[i] += 2.0 * x[i] * g[i];
            return;
        }
        case OpKind::scale: {
            if (!needs(0)) return;
            auto& d = pg(0);
            for (std::size_t i = 0; i < sz; ++i) d[i] += op.a * g[i];
            return;
        }
        case OpKind::add_scalar: {
            if (!needs(0)) return;
            auto& d = pg(0);
            for (std::size_t i = 0; i < sz; ++i) d[i] += g[i];
            return;
        }
        case OpKind::concat: {
            const std::size_t rows = n.shape.rows, total = n.shape.cols;
            std::size_t off = 0;
            for (std::size_t k = 0; k < op.parents.size(); ++k) {
                const std::size_t c = nodes_[op.parents[k]].shape.cols;
                if (needs(k)) {
                    auto& d = pg(k);
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < c; ++j) d[r * c + j] += g[r * total + off + j];
                }
                off += c;
            }
            return;
        }
        case OpKind::slice: {
            if (!needs(0)) return;
            const std::size_t begin = static_cast<std::size_t>(op.a);
            const std::size_t src_cols = nodes_[op.parents[0]].shape.cols;
            const std::size_t rows = n.shape.rows, c = n.shape.cols;
            auto& d = pg(0);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < c; ++j) d[r * src_cols + begin + j] += g[r * c + j];
            return;
        }
        case OpKind::softmax: {
            if (!needs(0)) return;
            const std::size_t rows = n.shape.rows, c = n.shape.cols;
            auto& d = pg(0);
            for (std::size_t r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += g[r * c + j] * y[r * c + j];
                for (std::size_t j = 0; j < c; ++j) d[r * c + j] += y[r * c + j] * (g[r * c + j] - dot);
            }
            return;
        }
        case OpKind::log_softmax: {
            if (!needs(0)) return;
            const std::size_t rows = n.shape.rows, c = n.shape.cols;
            auto& d = pg(0);
            for (std::size_t r = 0; r < rows; ++r) {
                double gs = 0.0;
                for (std::size_t j = 0; j < c; ++j) gs += g[r * c + j];
                for (std::size_t j = 0; j < c; ++j) d[r * c + j] += g[r * c + j] - std::exp(y[r * c + j]) * gs;
            }
            return;
        }
        case OpKind::sum: {
            if (!needs(0)) return;
            auto& d = pg(0);
            for (auto& v : d) v += g[0];
            return;
        }
        case OpKind::row_sum: {
            if (!needs(0)) return;
            const std::size_t c = nodes_[op.parents[0]].shape.cols;
            auto& d = pg(0);
            for (std::size_t r = 0; r < n.shape.rows; ++r)
                for (std::size_t j = 0; j < c; ++j) d[r * c + j] += g[r];
            return;
        }
        case OpKind::pick: {
            if (!needs(0)) return;
            const std::size_t c = nodes_[op.parents[0]].shape.cols;
            auto& d = pg(0);
            for (std::size_t r = 0; r < n.shape.rows; ++r) d[r * c + op.indices[r]] += g[r];
            return;
        }
        case OpKind::minimum: {
            auto a = pv(0), b = pv(1);
            const bool na = needs(0), nb = needs(1);
            std::vector<double>* da = na ? &pg(0) : nullptr;
            std::vector<double>* db = nb ? &pg(1) : nullptr;
            for (std::size_t i = 0; i < sz; ++i) {
                if (a[i] <= b[i]) {
                    if (da) (*da)[i] += g[i];
                } else if (db) {
                    (*db)[i] += g[i];
                }
            }
            return;
        }
        case OpKind::clamp: {
            if (!needs(0)) return;
            auto x = pv(0);
            auto& d = pg(0);
            for (std::size_t i = 0; i < sz; ++i)
                if (x[i] >= op.a && x[i] <= op.b) d[i] += g[i];
            return;
        }
        case OpKind::custom: {
            if (!needs(0)) return;
            auto x = pv(0);
            const auto& c = customs_[op.custom];
            auto& d = pg(0);
            for (std::size_t i = 0; i < sz; ++i) d[i] += g[i] * c.df(x[i]);
            return;
        }
    }
}

// ---- ops ------------------------------------------------------------------

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
    if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
    return a.tape();
}

OpRecord rec(OpKind k, std::initializer_list<NodeId> parents) {
    OpRecord r;
    r.kind = k;
    r.parents.assign(parents.begin(), parents.end());
    return r;
}

template <class F>
Var unary(Var a, OpKind k, F f) {
    auto x = a.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    return a.tape().record(a.shape(), std::move(out), rec(k, {a.id()}));
}

template <class F>
Var binary(Var a, Var b, OpKind k, const char* name, F f) {
    Tape& t = same_tape(a, b, name);
    if (a.shape() != b.shape()) throw_shape_mismatch(name, a.shape(), b.shape());
    auto x = a.value(), y = b.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i], y[i]);
    return t.record(a.shape(), std::move(out), rec(k, {a.id(), b.id()}));
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, OpKind::add, "add", [](double x, double y) { return x + y; }); }
Var sub(Var a, Var b) { return binary(a, b, OpKind::sub, "sub", [](double x, double y) { return x - y; }); }
Var mul(Var a, Var b) { return binary(a, b, OpKind::mul, "mul", [](double x, double y) { return x * y; }); }
Var minimum(Var a, Var b) {
    return binary(a, b, OpKind::minimum, "minimum", [](double x, double y) { return x <= y ? x : y; });
}

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b, "matmul");
    const Shape sa = a.shape(), sb = b.shape();
    if (sa.cols != sb.rows) throw_shape_mismatch("matmul", sa, sb);
    std::vector<double> out(sa.rows * sb.cols, 0.0);
    gemm_accumulate(a.value(), b.value(), out, sa.rows, sa.cols, sb.cols);
    return t.record(Shape{sa.rows, sb.cols}, std::move(out), rec(OpKind::matmul, {a.id(), b.id()}));
}

Var affine(Var x, Var w, Var bias) {
    Tape& t = same_tape(x, w, "affine");
    same_tape(x, bias, "affine");
    const Shape sx = x.shape(), sw = w.shape(), sb = bias.shape();
    if (sx.cols != sw.rows) throw_shape_mismatch("affine", sx, sw);
    if (sb.rows != 1 || sb.cols != sw.cols) throw_shape_mismatch("affine(bias)", sw, sb);
    std::vector<double> out(sx.rows * sw.cols);
    auto bv = bias.value();
    for (std::size_t i = 0; i < sx.rows; ++i)
        std::copy(bv.begin(), bv.end(), out.begin() + static_cast<std::ptrdiff_t>(i * sw.cols));
    gemm_accumulate(x.value(), w.value(), out, sx.rows, sx.cols, sw.cols);
    return t.record(Shape{sx.rows, sw.cols}, std::move(out), rec(OpKind::affine, {x.id(), w.id(), bias.id()}));
}

Var tanh(Var a) { return unary(a, OpKind::tanh, [](double x) { return std::tanh(x); }); }
Var sigmoid(Var a) {
    return unary(a, OpKind::sigmoid, [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    });
}
Var relu(Var a) { return unary(a, OpKind::relu, [](double x) { return x > 0.0 ? x : 0.0; }); }
Var exp(Var a) { return unary(a, OpKind::exp, [](double x) { return std::exp(x); }); }
Var log(Var a) { return unary(a, OpKind::log, [](double x) { return std::log(x); }); }
Var square(Var a) { return unary(a, OpKind::square, [](double x) { return x * x; }); }

Var scale(Var a, double c) {
    auto r = rec(OpKind::scale, {a.id()});
    r.a = c;
    auto x = a.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = c * x[i];
    return a.tape().record(a.shape(), std::move(out), std::move(r));
}

Var add_scalar(Var a, double c) {
    auto r = rec(OpKind::add_scalar, {a.id()});
    r.a = c;
    auto x = a.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + c;
    return a.tape().record(a.shape(), std::move(out), std::move(r));
}

Var concat(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    Tape& t = parts[0].tape();
    const std::size_t rows = parts[0].shape().rows;
    std::size_t total = 0;
    OpRecord r;
    r.kind = OpKind::concat;
    for (const auto& p : parts) {
        same_tape(parts[0], p, "concat");
        if (p.shape().rows != rows) throw_shape_mismatch("concat", parts[0].shape(), p.shape());
        total += p.shape().cols;
        r.parents.push_back(p.id());
    }
    std::vector<double> out(rows * total);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t c = p.shape().cols;
        auto v = p.value();
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < c; ++j) out[i * total + off + j] = v[i * c + j];
        off += c;
    }
    return t.record(Shape{rows, total}, std::move(out), std::move(r));
}

Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    const Shape s = a.shape();
    if (begin >= end || end > s.cols) {
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) + ") outside " +
                         s.to_string());
    }
    const std::size_t c = end - begin;
    std::vector<double> out(s.rows * c);
    auto v = a.value();
    for (std::size_t i = 0; i < s.rows; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = v[i * s.cols + begin + j];
    auto r = rec(OpKind::slice, {a.id()});
    r.a = static_cast<double>(begin);
    return a.tape().record(Shape{s.rows, c}, std::move(out), std::move(r));
}

namespace {

void check_finite(std::span<const double> v, const char* op) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(op) + ": non-finite input");
}

}  // namespace

Var softmax(Var logits) {
    const Shape s = logits.shape();
    if (s.cols == 0) throw ShapeError("softmax: empty row");
    auto v = logits.value();
    check_finite(v, "softmax");
    std::vector<double> out(v.size());
    for (std::size_t r = 0; r < s.rows; ++r) {
        const double* row = v.data() + r * s.cols;
        const double mx = *std::max_element(row, row + s.cols);
        double z = 0.0;
        for (std::size_t j = 0; j < s.cols; ++j) {
            out[r * s.cols + j] = std::exp(row[j] - mx);
            z += out[r * s.cols + j];
        }
        for (std::size_t j = 0; j < s.cols; ++j) out[r * s.cols + j] /= z;
    }
    return logits.tape().record(s, std::move(out), rec(OpKind::softmax, {logits.id()}));
}

Var log_softmax(Var logits) {
    const Shape s = logits.shape();
    if (s.cols == 0) throw ShapeError("log_softmax: empty row");
    auto v = logits.value();
    check_finite(v, "log_softmax");
    std::vector<double> out(v.size());
    for (std::size_t r = 0; r < s.rows; ++r) {
        const double* row = v.data() + r * s.cols;
        const double mx = *std::max_element(row, row + s.cols);
        double z = 0.0;
        for (std::size_t j = 0; j < s.cols; ++j) z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < s.cols; ++j) out[r * s.cols + j] = row[j] - lse;
    }
    return logits.tape().record(s, std::move(out), rec(OpKind::log_softmax, {logits.id()}));
}

Var sum(Var a) {
    double acc = 0.0;
    for (double x : a.value()) acc += x;
    return a.tape().record(Shape{1, 1}, {acc}, rec(OpKind::sum, {a.id()}));
}

Var mean(Var a) {
    const auto n = a.shape().size();
    if (n == 0) throw ShapeError("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var row_sum(Var a) {
    const Shape s = a.shape();
    auto v = a.value();
    std::vector<double> out(s.rows, 0.0);
    for (std::size_t r = 0; r < s.rows; ++r)
        for (std::size_t j = 0; j < s.cols; ++j) out[r] += v[r * s.cols + j];
    return a.tape().record(Shape{s.rows, 1}, std::move(out), rec(OpKind::row_sum, {a.id()}));
}

Var pick(Var a, std::span<const std::size_t> idx) {
    const Shape s = a.shape();
    if (idx.size() != s.rows) {
        throw ShapeError("pick: " + std::to_string(idx.size()) + " indices for " + s.to_string());
    }
    auto v = a.value();
    std::vector<double> out(s.rows);
    for (std::size_t r = 0; r < s.rows; ++r) {
        if (idx[r] >= s.cols) throw ShapeError("pick: index out of range for " + s.to_string());
        out[r] = v[r * s.cols + idx[r]];
    }
    auto r = rec(OpKind::pick, {a.id()});
    r.indices.assign(idx.begin(), idx.end());
    return a.tape().record(Shape{s.rows, 1}, std::move(out), std::move(r));
}

Var clamp(Var a, double lo, double hi) {
    auto x = a.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::min(std::max(x[i], lo), hi);
    auto r = rec(OpKind::clamp, {a.id()});
    r.a = lo;
    r.b = hi;
    return a.tape().record(a.shape(), std::move(out), std::move(r));
}

Var custom_unary(Var a, CustomUnary op) {
    auto x = a.value();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = op.f(x[i]);
    auto r = rec(OpKind::custom, {a.id()});
    r.custom = a.tape().add_custom(std::move(op));
    return a.tape().record(a.shape(), std::move(out), std::move(r));
}

Var forward_op(OpKind kind, std::span<const Var> in) {
    auto need = [&](std::size_t n) {
        if (in.size() != n) {
            throw std::invalid_argument(std::string("forward_op(") + op_name(kind) + "): expected " +
                                        std::to_string(n) + " inputs, got " + std::to_string(in.size()));
        }
    };
    switch (kind) {
        case OpKind::add: need(2); return add(in[0], in[1]);
        case OpKind::sub: need(2); return sub(in[0], in[1]);
        case OpKind::mul: need(2); return mul(in[0], in[1]);
        case OpKind::matmul: need(2); return matmul(in[0], in[1]);
        case OpKind::affine: need(3); return affine(in[0], in[1], in[2]);
        case OpKind::tanh: need(1); return tanh(in[0]);
        case OpKind::sigmoid: need(1); return sigmoid(in[0]);
        case OpKind::relu: need(1); return relu(in[0]);
        case OpKind::concat: return concat(in);
        case OpKind::softmax: need(1); return softmax(in[0]);
        case OpKind::log_softmax: need(1); return log_softmax(in[0]);
        default:
            throw std::invalid_argument(std::string("forward_op: unsupported kind ") + op_name(kind));
    }
}

}  // namespace dve::diff
