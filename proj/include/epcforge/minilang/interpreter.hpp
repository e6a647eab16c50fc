// SPDX-License-Identifier: Apache-2.0
//
// Deterministic evaluator. Every construct is charged a fixed number of cost
// units; the total stands in for running time.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "epcforge/minilang/ast.hpp"

namespace epcforge::minilang {

// Charge table. Only the relative order is meant to matter: a map lookup is
// a constant while a scan is a loop of statements.
namespace cost {
inline constexpr std::uint64_t kStatement = 1;
inline constexpr std::uint64_t kOperator = 1;  // binary and unary
inline constexpr std::uint64_t kLen = 1;
inline constexpr std::uint64_t kIndex = 1;
inline constexpr std::uint64_t kAppend = 1;
inline constexpr std::uint64_t kMapInsert = 2;
inline constexpr std::uint64_t kMapLookup = 2;  // m[k] and has(m, k)
inline constexpr std::uint64_t kRead = 1;
inline constexpr std::uint64_t kCall = 2;
inline constexpr std::uint64_t kListElement = 1;  // per element of a list literal
}  // namespace cost

inline constexpr std::uint64_t kDefaultFuel = 10'000'000;
inline constexpr int kMaxCallDepth = 1000;

enum class ExecStatus { Ok, ParseError, RuntimeError, FuelExhausted, OutputMismatch };

std::string_view to_string(ExecStatus status);

struct ExecOutcome {
    ExecStatus status = ExecStatus::Ok;
    std::string output;   // print results joined by '\n'
    std::uint64_t cost = 0;
    std::string message;  // diagnostic for non-ok statuses

    bool operator==(const ExecOutcome&) const = default;

    /// The program ran to completion (its output may still be wrong).
    bool terminated() const noexcept {
        return status == ExecStatus::Ok || status == ExecStatus::OutputMismatch;
    }
};

/// Runs `program` with whitespace-separated integers in `input` feeding
/// read(). Integer overflow, division by zero, bad indices, missing map keys
/// and exhausting input are runtime errors. Once the cost would exceed
/// `fuel` the run stops with FuelExhausted and cost == fuel.
ExecOutcome execute(const Program& program, std::string_view input,
                    std::uint64_t fuel = kDefaultFuel);

/// execute() and compare the output against `expected` (trailing whitespace
/// ignored on both sides). A mismatch keeps the cost of the completed run.
ExecOutcome check(const Program& program, std::string_view input, std::string_view expected,
                  std::uint64_t fuel = kDefaultFuel);

/// Lex, parse, then execute; lexer and parser failures become ParseError.
ExecOutcome run_source(std::string_view source, std::string_view input,
                       std::uint64_t fuel = kDefaultFuel,
                       std::optional<std::string_view> expected = std::nullopt);

/// Median wall-clock microseconds over `repetitions` runs. Not deterministic;
/// never used by tests that compare numbers.
double wall_clock_us(const Program& program, std::string_view input, int repetitions = 11,
                     std::uint64_t fuel = kDefaultFuel);

}  // namespace epcforge::minilang
