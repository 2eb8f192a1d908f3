#include "dve/diff/params.hpp"

#include <cmath>
#include <stdexcept>

namespace dve::diff {

Parameter& ParamStore::add(const std::string& name, Shape shape) {
    if (contains(name)) throw std::invalid_argument("ParamStore: duplicate parameter '" + name + "'");
    index_.emplace(name, params_.size());
    params_.push_back(Parameter{name, Tensor(shape), Tensor(shape)});
    return params_.back();
}

Parameter& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
    return params_[it->second];
}

const Parameter& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamStore: no parameter '" + name + "'");
    return params_[it->second];
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParamStore::init_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : t.data()) v = rng.uniform(-bound, bound);
}

std::vector<double> ParamStore::flat_values() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& p : params_) out.insert(out.end(), p.value.data().begin(), p.value.data().end());
    return out;
}

std::vector<double> ParamStore::flat_grads() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& p : params_) out.insert(out.end(), p.grad.data().begin(), p.grad.data().end());
    return out;
}

void ParamStore::set_flat_values(const std::vector<double>& flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("ParamStore: flat size mismatch");
    std::size_t off = 0;
    for (auto& p : params_) {
        for (auto& v : p.value.data()) v = flat[off++];
    }
}

}  // namespace dve::diff
