#include "dve/train/advantage.hpp"

#include <cmath>
#include <stdexcept>

namespace dve::train {

std::vector<double> gae(const Segment& seg, double gamma, double lambda) {
    if (!(gamma >= 0.0 && gamma <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0)) {
        throw std::invalid_argument("gae: gamma and lambda must lie in [0, 1]");
    }
    const std::size_t T = seg.reward.size();
    if (seg.value.size() != T || seg.done.size() != T || seg.truncated.size() != T || seg.next_value.size() != T) {
        throw std::invalid_argument("gae: segment arrays differ in length");
    }
    std::vector<double> adv(T, 0.0);
    double carry = 0.0;
    for (std::size_t k = T; k-- > 0;) {
        double next_v;
        bool continues;
        if (seg.done[k]) {
            next_v = seg.truncated[k] ? seg.next_value[k] : 0.0;
            continues = false;
        } else if (k + 1 == T) {
            next_v = seg.next_value[k];
            continues = false;
        } else {
            next_v = seg.value[k + 1];
            continues = true;
        }
        const double delta = seg.reward[k] + gamma * next_v - seg.value[k];
        carry = delta + (continues ? gamma * lambda * carry : 0.0);
        adv[k] = carry;
    }
    return adv;
}

void compute_returns_advantages(RolloutBatch& batch, double gamma, double lambda) {
    const std::size_t N = batch.size(), T = batch.steps_per_worker;
    batch.advantages.assign(N, 0.0);
    batch.returns.assign(N, 0.0);
    for (std::size_t w = 0; w < batch.n_workers; ++w) {
        const std::size_t o = w * T;
        Segment seg{{batch.reward.data() + o, T},
                    {batch.value_pred.data() + o, T},
                    {batch.done.data() + o, T},
                    {batch.truncated.data() + o, T},
                    {batch.next_value.data() + o, T}};
        const auto adv = gae(seg, gamma, lambda);
        for (std::size_t t = 0; t < T; ++t) {
            batch.advantages[o + t] = adv[t];
            batch.returns[o + t] = adv[t] + batch.value_pred[o + t];
        }
    }
    double mean = 0.0;
    for (double a : batch.advantages) mean += a;
    mean /= static_cast<double>(N);
    double var = 0.0;
    for (double a : batch.advantages) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(N));
    batch.advantages_norm.resize(N);
    for (std::size_t i = 0; i < N; ++i) batch.advantages_norm[i] = (batch.advantages[i] - mean) / (sd + 1e-8);
}

}  // namespace dve::train
