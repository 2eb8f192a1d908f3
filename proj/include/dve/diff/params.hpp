#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "dve/diff/tensor.hpp"
#include "dve/rng.hpp"

namespace dve::diff {

/// A named trainable tensor with its accumulated gradient.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

/// Ordered collection of named parameters. Iteration order is insertion
/// order, which fixes the layout of flattened gradients and checkpoints.
class ParamStore {
public:
    Parameter& add(const std::string& name, Shape shape);

    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;

    std::size_t size() const noexcept { return params_.size(); }
    Parameter& operator[](std::size_t i) { return params_[i]; }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }

    auto begin() noexcept { return params_.begin(); }
    auto end() noexcept { return params_.end(); }
    auto begin() const noexcept { return params_.begin(); }
    auto end() const noexcept { return params_.end(); }

    void zero_grad();
    std::size_t parameter_count() const;

    /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] with fan_in = rows of a
    /// weight matrix (inputs x outputs layout). Bias rows use the fan-in of
    /// the weight they accompany, passed explicitly.
    static void init_uniform(Tensor& t, std::size_t fan_in, Rng& rng);

    std::vector<double> flat_values() const;
    std::vector<double> flat_grads() const;
    void set_flat_values(const std::vector<double>& flat);

private:
    std::vector<Parameter> params_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace dve::diff
