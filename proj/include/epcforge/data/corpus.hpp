// SPDX-License-Identifier: Apache-2.0
//
// Synthetic corpus generation and the line-delimited corpus file format.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "epcforge/data/sample.hpp"

namespace epcforge::data {

inline constexpr std::string_view kCorpusHeader = "epcforge-corpus-v1";

/// Relative weights of the three difficulty tiers.
struct DifficultyMix {
    double easy = 0.4;
    double intermediate = 0.35;
    double hard = 0.25;
};

struct CorpusOptions {
    DifficultyMix mix;
    /// The last fraction of samples (by submission index) is the test split.
    double test_fraction = 0.2;
};

/// Names of the template families, in the order generate_template() takes.
const std::vector<std::string>& template_names();

/// Difficulty tier of a template family.
Difficulty template_difficulty(std::size_t family);

/// One sample from template `family` using `seed`. Split and submission index
/// are left at their defaults.
EpcSample generate_template(std::size_t family, std::uint64_t seed);

/// `n` samples; sample i depends only on (seed, i, mix). Throws
/// std::logic_error if a template ever produces a sample that fails
/// validate_sample().
std::vector<EpcSample> generate_corpus(std::size_t n, std::uint64_t seed,
                                       const CorpusOptions& options = {});

/// Checks the sample invariants: all programs parse and pass every I/O test,
/// and the cheapest efficient program costs less than the inefficient one on
/// every test input. Returns an empty string when valid, else the reason.
std::string validate_sample(const EpcSample& sample);

class CorpusError : public std::runtime_error {
public:
    CorpusError(std::size_t line, const std::string& message);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Writes the header and one JSON object per sample. The file appears
/// atomically; on failure nothing is left at `path`.
void save_corpus(const std::filesystem::path& path, const std::vector<EpcSample>& corpus);

/// Reads a corpus file. Structural errors report the 1-based line number and
/// the offending field. With `check_programs` every sample is also run
/// through validate_sample().
std::vector<EpcSample> load_corpus(const std::filesystem::path& path, bool check_programs = true);

}  // namespace epcforge::data
