// SPDX-License-Identifier: Apache-2.0

#include "epcforge/data/sample.hpp"

#include <stdexcept>

namespace epcforge::data {

std::string_view to_string(Difficulty d) {
    switch (d) {
        case Difficulty::Easy: return "easy";
        case Difficulty::Intermediate: return "intermediate";
        case Difficulty::Hard: return "hard";
    }
    return "easy";
}

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Difficulty parse_difficulty(std::string_view text) {
    if (text == "easy") return Difficulty::Easy;
    if (text == "intermediate") return Difficulty::Intermediate;
    if (text == "hard") return Difficulty::Hard;
    throw std::invalid_argument("unknown difficulty '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "test") return Split::Test;
    throw std::invalid_argument("unknown split '" + std::string(text) + "'");
}

std::string io_text(const std::vector<IoExample>& examples) {
    std::string out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (i) out += " ; ";
        out += "input : " + examples[i].input + " output : " + examples[i].output;
    }
    // multi-line outputs read as one line of words
    for (char& c : out) {
        if (c == '\n') c = ' ';
    }
    return out;
}

std::array<std::string, kNumParts> split_nl(const EpcSample& sample) {
    return {sample.tags, sample.description, sample.input_format, sample.output_format,
            io_text(sample.io_examples)};
}

std::string nl_description(const EpcSample& sample) {
    const auto parts = split_nl(sample);
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += kPartSeparator;
        out += parts[i];
    }
    return out;
}

}  // namespace epcforge::data
