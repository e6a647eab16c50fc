// SPDX-License-Identifier: Apache-2.0

#include "epcforge/nn/tensor.hpp"

#include <cmath>
#include <sstream>

namespace epcforge::nn {

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << " x ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

ShapeError::ShapeError(const std::string& op, const Shape& a, const Shape& b)
    : std::invalid_argument(op + ": incompatible shapes " + shape_string(a) + " and " +
                            shape_string(b)) {}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), values(shape_size(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != shape_size(shape)) {
        throw ShapeError("tensor of shape " + shape_string(shape) + " given " +
                         std::to_string(values.size()) + " values");
    }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> v) {
    return Tensor({rows, cols}, std::vector<double>(v));
}

Tensor Tensor::vector(std::initializer_list<double> v) {
    return Tensor({v.size()}, std::vector<double>(v));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

bool Tensor::all_finite() const noexcept {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace epcforge::nn
