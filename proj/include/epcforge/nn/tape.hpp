// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over a recorded op graph.
//
// A Tape owns every intermediate value produced during one forward pass.
// Parameters are referenced, not copied; after backward() their gradients
// are accumulated into Tensor::grad of the referenced tensor.

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

#include "epcforge/nn/tensor.hpp"

namespace epcforge::nn {

struct Var {
    std::size_t id = std::numeric_limits<std::size_t>::max();
    bool valid() const noexcept { return id != std::numeric_limits<std::size_t>::max(); }
};

class Tape {
public:
    using Backward = std::function<void(Tape&, Var self)>;

    /// With recording off no backward closures are kept (inference mode).
    explicit Tape(bool recording = true) : recording_(recording) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    /// Binds a persistent tensor. It must outlive the tape.
    Var parameter(Tensor& param);

    /// Records an op result. `backward` reads grad(self) and accumulates into
    /// its inputs; it is dropped when not recording or no input needs a gradient.
    Var emit(Tensor value, bool requires_grad, Backward backward);

    const Tensor& value(Var v) const { return node(v).param ? *node(v).param : node(v).owned; }
    bool requires_grad(Var v) const { return node(v).requires_grad; }
    bool recording() const noexcept { return recording_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Gradient buffer of `v`, allocated (zeroed) on first access.
    std::vector<double>& grad(Var v);

    /// Back-propagates from a scalar output seeded with `seed`, then flushes
    /// parameter gradients into their tensors.
    void backward(Var out, double seed = 1.0);

private:
    struct Node {
        Tensor owned;
        Tensor* param = nullptr;
        bool requires_grad = false;
        std::vector<double> grad;
        Backward backward;
    };

    Node& node(Var v) { return nodes_.at(v.id); }
    const Node& node(Var v) const { return nodes_.at(v.id); }

    std::deque<Node> nodes_;
    bool recording_;
};

}  // namespace epcforge::nn
