// SPDX-License-Identifier: Apache-2.0
//
// Program rewrites used to build runtime-prediction training data.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "epcforge/minilang/ast.hpp"
#include "epcforge/minilang/token.hpp"

namespace epcforge::minilang {

/// Renames variables to var1, var2, ... and functions to func1, func2, ...
/// in order of first textual occurrence. Output and cost are unchanged.
Program rename_uniform(const Program& program);

/// Keeps loops, recursive functions and the calls that reach them, plus the
/// statements the kept code depends on. Prints and unrelated statements are
/// dropped. The result parses and never costs more than the input.
Program extract_loops_recursion(const Program& program);

/// Removes exactly llround(ratio * N) tokens at positions drawn without
/// replacement; survivors keep their order.
std::vector<Token> random_token_delete(std::span<const Token> tokens, double ratio,
                                       std::uint64_t seed);

}  // namespace epcforge::minilang
