// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "epcforge/model/ecode.hpp"
#include "epcforge/nn/grad_suite.hpp"

namespace epcforge::model {

/// Tolerance for the end-to-end loss check; deeper compositions accumulate
/// more finite-difference error than single ops.
inline constexpr double kCompositeTolerance = 1e-3;

/// Small tiny-preset model used by the end-to-end check.
ECodeConfig grad_check_config();

/// Compares the loss gradient of a freshly initialised model against central
/// differences. For every parameter tensor it probes the entry with the
/// largest analytic gradient plus `entries_per_tensor` random entries whose
/// gradient is at least 1e-6 in magnitude, and
/// reports the worst relative error per tensor.
std::vector<nn::NamedCheck> ecode_grad_check(std::uint64_t seed, std::size_t entries_per_tensor = 3);

}  // namespace epcforge::model
