#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "dve/diff/params.hpp"

namespace dve::diff {

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam over a ParamStore. Parameters outside `trainable` (when given) are
/// never written.
class Adam {
public:
    explicit Adam(const ParamStore& params, AdamConfig cfg = {}, std::set<std::string> trainable = {});

    void step(ParamStore& params);

    AdamConfig& config() noexcept { return cfg_; }
    const AdamConfig& config() const noexcept { return cfg_; }
    std::int64_t steps() const noexcept { return t_; }

    // Moment access for checkpointing.
    std::vector<Tensor>& first_moments() noexcept { return m_; }
    std::vector<Tensor>& second_moments() noexcept { return v_; }
    const std::vector<Tensor>& first_moments() const noexcept { return m_; }
    const std::vector<Tensor>& second_moments() const noexcept { return v_; }
    void set_steps(std::int64_t t) noexcept { t_ = t; }

private:
    AdamConfig cfg_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::vector<bool> active_;
    std::int64_t t_ = 0;
};

/// Scales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(ParamStore& params, double max_norm);

}  // namespace dve::diff
