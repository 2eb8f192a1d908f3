#include "dve/diff/tensor.hpp"

#include <algorithm>

namespace dve::diff {

std::string Shape::to_string() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

void throw_shape_mismatch(const char* op, const Shape& a, const Shape& b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.to_string() + " vs " + b.to_string());
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
        throw ShapeError("Tensor: " + std::to_string(data_.size()) + " values for shape " + shape_.to_string());
    }
}

Tensor Tensor::row(std::initializer_list<double> values) {
    return Tensor(Shape{1, values.size()}, std::vector<double>(values));
}

Tensor Tensor::row(std::span<const double> values) {
    return Tensor(Shape{1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void gemm_accumulate(std::span<const double> a, std::span<const double> b, std::span<double> out,
                     std::size_t m, std::size_t k, std::size_t n) {
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = po + i * n;
        const double* arow = pa + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

}  // namespace dve::diff
