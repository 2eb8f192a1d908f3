#include "dve/diff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dve::diff {

namespace {

double evaluate(const GraphBuilder& f, ParamStore& params) {
    Tape tape(false);
    return f(tape, params).scalar();
}

}  // namespace

GradCheckReport grad_check(const GraphBuilder& f, ParamStore& params, double tol, double h) {
    const double first = evaluate(f, params);
    const double second = evaluate(f, params);
    if (first != second) throw std::logic_error("grad_check: graph builder is not deterministic");

    params.zero_grad();
    {
        Tape tape(true);
        Var root = f(tape, params);
        tape.backward(root);
    }

    GradCheckReport report;
    for (auto& p : params) {
        TensorCheck tc{p.name};
        auto w = p.value.data();
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double orig = w[k];
            w[k] = orig + h;
            const double fp = evaluate(f, params);
            w[k] = orig - h;
            const double fm = evaluate(f, params);
            w[k] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double ad = p.grad[k];
            const double abs_err = std::abs(ad - fd);
            const double rel = abs_err / std::max({std::abs(ad), std::abs(fd), 1e-3});
            tc.max_rel_error = std::max(tc.max_rel_error, rel);
            tc.max_abs_error = std::max(tc.max_abs_error, abs_err);
        }
        if (tc.max_rel_error > tol) report.passed = false;
        if (report.worst.empty() || tc.max_rel_error > report.worst_error) {
            report.worst = p.name;
            report.worst_error = tc.max_rel_error;
        }
        report.tensors.push_back(std::move(tc));
    }
    params.zero_grad();
    return report;
}

}  // namespace dve::diff
