// SPDX-License-Identifier: Apache-2.0

#include "epcforge/nn/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace epcforge::nn {

Var Tape::constant(Tensor value) {
    Node n;
    n.owned = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Tape::parameter(Tensor& param) {
    Node n;
    n.param = &param;
    n.requires_grad = recording_;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Tape::emit(Tensor value, bool requires_grad, Backward backward) {
    Node n;
    n.owned = std::move(value);
    n.requires_grad = recording_ && requires_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

std::vector<double>& Tape::grad(Var v) {
    Node& n = node(v);
    const std::size_t size = n.param ? n.param->size() : n.owned.size();
    if (n.grad.size() != size) n.grad.assign(size, 0.0);
    return n.grad;
}

void Tape::backward(Var out, double seed) {
    if (!recording_) throw std::logic_error("backward on a tape that is not recording");
    if (value(out).size() != 1) {
        throw ShapeError("backward", value(out).shape, Shape{1});
    }
    grad(out)[0] += seed;
    for (std::size_t i = out.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.empty()) continue;
        if (n.backward) n.backward(*this, Var{i});
    }
    for (Node& n : nodes_) {
        if (!n.param || n.grad.empty()) continue;
        n.param->ensure_grad();
        for (std::size_t k = 0; k < n.grad.size(); ++k) {
            if (!std::isfinite(n.grad[k])) {
                throw std::runtime_error("non-finite gradient reached a parameter");
            }
            n.param->grad[k] += n.grad[k];
        }
    }
}

}  // namespace epcforge::nn
