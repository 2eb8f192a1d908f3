#include "dve/envs/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dve::envs {

bool MdpSpec::is_terminal(std::size_t s) const { return std::binary_search(terminal.begin(), terminal.end(), s); }

void MdpSpec::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("MdpSpec: " + msg); };
    if (n_states == 0 || n_actions == 0) fail("empty state or action space");
    const std::size_t n = n_states * n_actions * n_states;
    if (transition.size() != n || reward.size() != n) fail("array sizes do not match S x A x S");
    if (!(gamma > 0.0 && gamma < 1.0)) fail("gamma must lie in (0,1)");
    if (start_dist.size() != n_states) fail("start_dist length differs from n_states");
    if (!std::is_sorted(terminal.begin(), terminal.end()) ||
        std::adjacent_find(terminal.begin(), terminal.end()) != terminal.end()) {
        fail("terminal set must be sorted and unique");
    }
    for (auto t : terminal)
        if (t >= n_states) fail("terminal state out of range");

    for (std::size_t s = 0; s < n_states; ++s) {
        for (std::size_t a = 0; a < n_actions; ++a) {
            double total = 0.0;
            for (std::size_t s2 = 0; s2 < n_states; ++s2) {
                const double pr = p(s, a, s2);
                if (pr < 0.0 || !std::isfinite(pr)) fail("negative or non-finite probability");
                if (!std::isfinite(r(s, a, s2))) fail("non-finite reward");
                total += pr;
            }
            if (std::abs(total - 1.0) > 1e-12) {
                fail("row (" + std::to_string(s) + "," + std::to_string(a) + ") sums to " + std::to_string(total));
            }
            if (is_terminal(s) && (p(s, a, s) != 1.0 || r(s, a, s) != 0.0)) {
                fail("terminal state " + std::to_string(s) + " must self-loop with zero reward");
            }
        }
    }
    double start = 0.0;
    for (double v : start_dist) {
        if (v < 0.0) fail("negative start probability");
        start += v;
    }
    if (std::abs(start - 1.0) > 1e-12) fail("start_dist does not sum to 1");
}

TabularPolicy TabularPolicy::uniform(std::size_t s, std::size_t a) {
    return TabularPolicy{s, a, std::vector<double>(s * a, 1.0 / static_cast<double>(a))};
}

void TabularPolicy::validate(const MdpSpec& spec) const {
    if (n_states != spec.n_states || n_actions != spec.n_actions || probs.size() != n_states * n_actions) {
        throw std::invalid_argument("TabularPolicy: dimensions do not match the MDP");
    }
    for (std::size_t s = 0; s < n_states; ++s) {
        double total = 0.0;
        for (double v : row(s)) {
            if (v < 0.0 || !std::isfinite(v)) throw std::invalid_argument("TabularPolicy: invalid probability");
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw std::invalid_argument("TabularPolicy: row " + std::to_string(s) + " is not a probability vector");
        }
    }
}

}  // namespace dve::envs
