// SPDX-License-Identifier: Apache-2.0

#include "epcforge/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace epcforge::nn {

namespace {

double evaluate(const ScalarOp& op, std::vector<Tensor>& inputs) {
    Tape tape(false);
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (auto& t : inputs) vars.push_back(tape.parameter(t));
    const Var out = op(tape, vars);
    return tape.value(out).values.at(0);
}

}  // namespace

GradCheckResult grad_check(const ScalarOp& op, std::vector<Tensor> inputs, double eps) {
    for (auto& t : inputs) t.zero_grad();
    {
        Tape tape(true);
        std::vector<Var> vars;
        vars.reserve(inputs.size());
        for (auto& t : inputs) vars.push_back(tape.parameter(t));
        const Var out = op(tape, vars);
        tape.backward(out);
    }

    GradCheckResult result;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const std::vector<double> analytic = inputs[i].grad;
        for (std::size_t k = 0; k < inputs[i].size(); ++k) {
            const double orig = inputs[i].values[k];
            inputs[i].values[k] = orig + eps;
            const double plus = evaluate(op, inputs);
            inputs[i].values[k] = orig - eps;
            const double minus = evaluate(op, inputs);
            inputs[i].values[k] = orig;
            const double numeric = (plus - minus) / (2.0 * eps);
            if (!std::isfinite(analytic[k]) || !std::isfinite(numeric)) {
                throw std::runtime_error("grad_check: non-finite gradient at input " +
                                         std::to_string(i) + " entry " + std::to_string(k));
            }
            const double err = std::abs(analytic[k] - numeric) /
                               std::max(1e-8, std::abs(analytic[k]) + std::abs(numeric));
            ++result.entries_checked;
            if (err > result.max_rel_error) {
                result.max_rel_error = err;
                result.worst_input = i;
                result.worst_index = k;
            }
        }
    }
    return result;
}

}  // namespace epcforge::nn
