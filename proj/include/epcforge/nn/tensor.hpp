// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major float64 tensor with an optional gradient buffer.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace epcforge::nn {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Raised when operand shapes are incompatible; the message names both shapes.
class ShapeError : public std::invalid_argument {
public:
    ShapeError(const std::string& op, const Shape& a, const Shape& b);
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised for invalid layer configuration (e.g. head count not dividing width).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class Tensor {
public:
    Shape shape;
    std::vector<double> values;
    /// Empty when the tensor carries no gradient.
    std::vector<double> grad;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0);
    Tensor(Shape s, std::vector<double> v);

    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> v);
    static Tensor vector(std::initializer_list<double> v);
    static Tensor identity(std::size_t n);

    std::size_t size() const noexcept { return values.size(); }
    std::size_t rank() const noexcept { return shape.size(); }
    bool empty() const noexcept { return values.empty(); }

    /// Matrix view: the last axis is columns, everything before it is rows.
    std::size_t cols() const noexcept { return shape.empty() ? 1 : shape.back(); }
    std::size_t rows() const noexcept { return cols() == 0 ? 0 : values.size() / cols(); }

    double& operator()(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    bool has_grad() const noexcept { return !grad.empty(); }
    void ensure_grad() { if (grad.size() != values.size()) grad.assign(values.size(), 0.0); }
    void zero_grad() { grad.assign(values.size(), 0.0); }

    bool all_finite() const noexcept;
};

std::size_t shape_size(const Shape& shape);

}  // namespace epcforge::nn
