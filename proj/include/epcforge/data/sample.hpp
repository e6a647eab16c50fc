// SPDX-License-Identifier: Apache-2.0
//
// One efficient-programming task: five natural-language parts, I/O tests, a
// slow reference program and one or more fast ones.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace epcforge::data {

enum class Difficulty { Easy, Intermediate, Hard };
enum class Split { Train, Test };

std::string_view to_string(Difficulty d);
std::string_view to_string(Split s);
/// Throws std::invalid_argument on unknown text.
Difficulty parse_difficulty(std::string_view text);
Split parse_split(std::string_view text);

struct IoExample {
    std::string input;
    std::string output;

    bool operator==(const IoExample&) const = default;
};

struct EpcSample {
    std::string tags;
    std::string description;
    std::string input_format;
    std::string output_format;
    std::vector<IoExample> io_examples;
    std::string inefficient_code;
    std::vector<std::string> efficient_codes;
    Difficulty difficulty = Difficulty::Easy;
    Split split = Split::Train;
    std::int64_t submission_index = 0;

    bool operator==(const EpcSample&) const = default;
};

/// The five natural-language parts, in the order the encoders consume them.
enum class NlPart { Tags, Description, InputFormat, OutputFormat, Samples };
inline constexpr std::size_t kNumParts = 5;

/// Text shown to the I/O-samples expert.
std::string io_text(const std::vector<IoExample>& examples);

/// Projects a sample onto its five NL parts (tags, description, input
/// format, output format, I/O samples).
std::array<std::string, kNumParts> split_nl(const EpcSample& sample);

/// Separator placed between parts in the flat description.
inline constexpr std::string_view kPartSeparator = "\n<sep>\n";

/// The five parts joined with kPartSeparator.
std::string nl_description(const EpcSample& sample);

}  // namespace epcforge::data
