// SPDX-License-Identifier: Apache-2.0
//
// A fixed battery of finite-difference checks over every tape op, shared by
// the unit tests, the acceptance run and `epcforge grad-check`.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace epcforge::nn {

struct NamedCheck {
    std::string name;
    double max_rel_error = 0.0;
};

/// Tolerance for single-op checks.
inline constexpr double kPrimitiveTolerance = 1e-4;

/// Runs each op check once with inputs drawn from `seed`.
std::vector<NamedCheck> primitive_grad_suite(std::uint64_t seed);

}  // namespace epcforge::nn
