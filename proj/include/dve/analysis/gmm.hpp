#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dve::analysis {

/// Diagonal-covariance Gaussian mixture. means and variances are [C x d]
/// row-major.
struct GmmFit {
    std::size_t n_components = 0;
    std::size_t dim = 0;
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> variances;
    double log_likelihood = 0.0;
    double aic = 0.0;
    std::size_t n_params = 0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> ll_trace;  // log-likelihood after each EM iteration of the kept restart
};

struct EmConfig {
    std::size_t restarts = 5;
    double tol = 1e-10;  // stop when the gain is below tol * (1 + |ll|)
    std::size_t max_iter = 1000;
    double var_floor = 1e-6;
    /// A component whose effective count drops below this is treated as
    /// empty and reseeded on a random data point.
    double min_count = 2.0;
};

/// (C - 1) mixing weights + C d means + C d variances.
std::size_t gmm_parameter_count(std::size_t C, std::size_t d);

/// 2k - 2 log-likelihood.
double aic_score(const GmmFit& fit);

/// Log-likelihood of row-major data [n x d] under a fitted mixture.
double gmm_log_likelihood(const GmmFit& fit, std::span<const double> data);

/// EM from `restarts` k-means++ seedings; keeps the highest final
/// log-likelihood. Requires n > C and d >= 1.
GmmFit em_fit(std::span<const double> data, std::size_t n, std::size_t d, std::size_t C, const EmConfig& cfg,
              std::uint64_t seed);

struct ClusterSelection {
    std::size_t best = 0;                // argmin of AIC / N, ties to the smaller C
    std::vector<double> aic_per_point;   // entry C - 1 holds AIC / N for C components
    std::vector<GmmFit> fits;
};

/// Fits C = 1..C_max to the n rows and selects the component count.
/// Rejects C_max >= n and data whose rows are all identical.
ClusterSelection select_num_clusters(std::span<const double> data, std::size_t n, std::size_t d, std::size_t C_max,
                                     const EmConfig& cfg, std::uint64_t seed);

std::string serialize_gmm(const GmmFit& fit);
GmmFit parse_gmm(const std::string& text);

}  // namespace dve::analysis
