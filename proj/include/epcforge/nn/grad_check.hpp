// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "epcforge/nn/tape.hpp"
#include "epcforge/nn/tensor.hpp"

namespace epcforge::nn {

/// Builds a scalar from the bound inputs.
using ScalarOp = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    std::size_t entries_checked = 0;
};

/// Compares the tape gradient of `op` against central finite differences for
/// every entry of every input. The per-entry error is
/// |g_a − g_fd| / max(1e-8, |g_a| + |g_fd|). Throws std::runtime_error on a
/// non-finite gradient.
GradCheckResult grad_check(const ScalarOp& op, std::vector<Tensor> inputs, double eps = 1e-4);

}  // namespace epcforge::nn
