#pragma once

#include <span>
#include <vector>

namespace dve::models {

/// delta = 1 / (N_b * sum_i alpha_i^2). Ranges over [1/N_b, 1]: 1 for a
/// uniform posterior, 1/N_b for a one-hot one. Rejects alpha that is not a
/// probability vector (tolerance 1e-9).
double confusion(std::span<const double> alpha);

/// rho_i = (1/T) sum_t delta(t) alpha_i(t) over one episode's posteriors.
/// Every row must have the same length N_b; the trace must be non-empty.
std::vector<double> contribution(std::span<const std::vector<double>> trace);

}  // namespace dve::models
