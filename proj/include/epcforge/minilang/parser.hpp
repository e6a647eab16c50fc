// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>

#include "epcforge/minilang/ast.hpp"
#include "epcforge/minilang/token.hpp"

namespace epcforge::minilang {

/// Parses and validates a token stream. Success defines "compilable": the
/// grammar matches, every variable is assigned (or a parameter) before its
/// first textual use, every call names a defined function with the right
/// arity, and `return` only appears inside functions.
/// Throws ParseError at the first offending token.
Program parse(std::span<const Token> tokens);

/// lex + parse.
Program parse_source(std::string_view source);

/// Canonical source: functions first, then main; 4-space blocks; minimal
/// parentheses. parse_source(to_source(p)) == p.
std::string to_source(const Program& program);

std::string to_source(const Expr& expr);

}  // namespace epcforge::minilang
