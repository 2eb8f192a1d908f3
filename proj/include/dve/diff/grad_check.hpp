#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dve/diff/params.hpp"
#include "dve/diff/tape.hpp"

namespace dve::diff {

/// Builds a scalar-rooted graph from the current parameter values.
using GraphBuilder = std::function<Var(Tape&, ParamStore&)>;

struct TensorCheck {
    std::string name;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
};

struct GradCheckReport {
    std::vector<TensorCheck> tensors;
    bool passed = true;
    /// Name of the tensor with the largest relative error.
    std::string worst;
    double worst_error = 0.0;
};

/// Compares reverse-mode gradients against central finite differences.
/// Relative error is |ad - fd| / max(|ad|, |fd|, 1e-3); the floor keeps
/// near-zero gradients from amplifying finite-difference rounding.
/// Throws std::logic_error when the builder is not deterministic.
GradCheckReport grad_check(const GraphBuilder& f, ParamStore& params, double tol = 1e-4, double h = 1e-5);

}  // namespace dve::diff
