#include "dve/analysis/value_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dve/textio.hpp"

namespace dve::analysis {

std::vector<double> ValueMatrix::column(std::size_t state) const {
    if (state >= n_states) throw std::out_of_range("ValueMatrix: column out of range");
    std::vector<double> out(n_levels);
    for (std::size_t i = 0; i < n_levels; ++i) out[i] = at(i, state);
    return out;
}

void ValueMatrix::validate() const {
    if (values.size() != n_levels * n_states || level_ids.size() != n_levels || state_ids.size() != n_states) {
        throw std::invalid_argument("ValueMatrix: shape mismatch");
    }
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("ValueMatrix: non-finite entry");
    if (policy_tag.empty() || policy_tag.find_first_of(" \t\n") != std::string::npos) {
        throw std::invalid_argument("ValueMatrix: policy tag must be a non-empty word");
    }
}

std::string serialize_value_matrix(const ValueMatrix& m) {
    m.validate();
    std::ostringstream out;
    out << "dve-value-matrix 1\n";
    out << "policy " << m.policy_tag << '\n';
    out << "levels " << m.n_levels << '\n';
    out << "states " << m.n_states << '\n';
    out << "level_ids";
    for (auto id : m.level_ids) out << ' ' << id;
    out << "\nstate_ids";
    for (auto id : m.state_ids) out << ' ' << id;
    out << '\n';
    for (std::size_t i = 0; i < m.n_levels; ++i)
        out << "row " << textio::join_exact({m.values.data() + i * m.n_states, m.n_states}) << '\n';
    out << "end\n";
    return out.str();
}

ValueMatrix parse_value_matrix(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) {
        throw std::runtime_error("value matrix line " + std::to_string(line_no) + ": " + msg);
    };
    auto next = [&](const std::string& key) {
        if (!std::getline(in, line)) fail("unexpected end of text");
        ++line_no;
        std::istringstream ls(line);
        std::string k;
        ls >> k;
        if (k != key) fail("expected '" + key + "'");
        std::string rest;
        std::getline(ls, rest);
        return rest;
    };
    if (!std::getline(in, line) || line != "dve-value-matrix 1") fail("missing 'dve-value-matrix 1' header");
    ++line_no;
    ValueMatrix m;
    {
        std::istringstream ls(next("policy"));
        ls >> m.policy_tag;
    }
    try {
        m.n_levels = std::stoul(next("levels"));
        m.n_states = std::stoul(next("states"));
        std::istringstream li(next("level_ids"));
        for (std::uint64_t v; li >> v;) m.level_ids.push_back(v);
        std::istringstream si(next("state_ids"));
        for (std::size_t v; si >> v;) m.state_ids.push_back(v);
        for (std::size_t i = 0; i < m.n_levels; ++i) {
            auto row = textio::split_doubles(next("row"));
            if (row.size() != m.n_states) fail("row has " + std::to_string(row.size()) + " entries");
            m.values.insert(m.values.end(), row.begin(), row.end());
        }
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
    next("end");
    m.validate();
    return m;
}

Histogram histogram(const std::vector<double>& values, std::size_t bins) {
    if (values.empty() || bins == 0) throw std::invalid_argument("histogram: need values and at least one bin");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h;
    h.counts.assign(bins, 0);
    for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins));
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
        ++h.counts[std::min(b, bins - 1)];
    }
    return h;
}

ClusteringReport clustering_hypothesis_test(const ValueMatrix& m, std::size_t state_index, std::size_t C_max,
                                            const EmConfig& cfg, std::uint64_t seed, std::size_t bins) {
    m.validate();
    ClusteringReport r;
    r.state_index = state_index;
    r.values = m.column(state_index);
    r.selection = select_num_clusters(r.values, m.n_levels, 1, std::min(C_max, m.n_levels - 1), cfg, seed);
    r.prefers_multiple = r.selection.best >= 2;
    r.hist = histogram(r.values, bins);
    return r;
}

}  // namespace dve::analysis
