#include "dve/models/cluster_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dve::models {

double confusion(std::span<const double> alpha) {
    if (alpha.empty()) throw std::invalid_argument("confusion: empty posterior");
    double total = 0.0;
    for (double a : alpha) {
        if (!std::isfinite(a) || a < 0.0) throw std::invalid_argument("confusion: posterior has a negative or non-finite entry");
        total += a;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("confusion: posterior does not sum to 1");
    // (sum b)^2 / (N sum b^2) with b = alpha / max(alpha) equals 1/(N sum alpha^2)
    // when sum alpha = 1, and is exact at the uniform and one-hot endpoints.
    const double top = *std::max_element(alpha.begin(), alpha.end());
    double sb = 0.0, sb2 = 0.0;
    for (double a : alpha) {
        const double b = a / top;
        sb += b;
        sb2 += b * b;
    }
    return sb * sb / (static_cast<double>(alpha.size()) * sb2);
}

std::vector<double> contribution(std::span<const std::vector<double>> trace) {
    if (trace.empty()) throw std::invalid_argument("contribution: empty trace");
    const std::size_t nb = trace.front().size();
    std::vector<double> rho(nb, 0.0);
    for (const auto& alpha : trace) {
        if (alpha.size() != nb) throw std::invalid_argument("contribution: posterior length changes within the trace");
        const double d = confusion(alpha);
        for (std::size_t i = 0; i < nb; ++i) rho[i] += d * alpha[i];
    }
    for (double& r : rho) r /= static_cast<double>(trace.size());
    return rho;
}

}  // namespace dve::models
