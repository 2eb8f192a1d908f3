#include "dve/envs/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace dve::envs {

EvalMetrics spl(std::span<const EpisodeOutcome> episodes) {
    if (episodes.empty()) throw std::invalid_argument("spl: empty episode list");
    EvalMetrics m;
    m.episodes = episodes.size();
    for (const auto& e : episodes) {
        if (e.optimal_len < 1) throw std::invalid_argument("spl: optimal path length must be >= 1");
        if (e.success) {
            if (e.path_len < 1) throw std::invalid_argument("spl: successful episode with empty path");
            const auto l = static_cast<double>(e.optimal_len);
            m.spl += l / std::max(static_cast<double>(e.path_len), l);
            m.success_rate += 1.0;
        }
        m.mean_total_reward += e.total_reward;
    }
    const auto n = static_cast<double>(episodes.size());
    m.spl /= n;
    m.success_rate /= n;
    m.mean_total_reward /= n;
    return m;
}

}  // namespace dve::envs
