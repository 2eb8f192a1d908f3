#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dve/analysis/gmm.hpp"

namespace dve::analysis {

/// Values of one frozen policy: row i is level level_ids[i], column k is
/// probe state state_ids[k].
struct ValueMatrix {
    std::size_t n_levels = 0;
    std::size_t n_states = 0;
    std::vector<double> values;  // [n_levels x n_states]
    std::vector<std::uint64_t> level_ids;
    std::vector<std::size_t> state_ids;
    std::string policy_tag;

    double at(std::size_t level, std::size_t state) const { return values[level * n_states + state]; }
    std::vector<double> column(std::size_t state) const;
    /// Shapes agree and every entry is finite; tag has no whitespace.
    void validate() const;
};

std::string serialize_value_matrix(const ValueMatrix& m);
ValueMatrix parse_value_matrix(const std::string& text);

struct Histogram {
    std::vector<double> edges;  // bins + 1 edges
    std::vector<std::size_t> counts;
};

Histogram histogram(const std::vector<double>& values, std::size_t bins);

struct ClusteringReport {
    std::size_t state_index = 0;
    std::vector<double> values;
    ClusterSelection selection;
    bool prefers_multiple = false;
    Histogram hist;
};

/// 1-D mixture fits across levels for one probe column.
ClusteringReport clustering_hypothesis_test(const ValueMatrix& m, std::size_t state_index, std::size_t C_max,
                                            const EmConfig& cfg, std::uint64_t seed, std::size_t bins = 10);

}  // namespace dve::analysis
