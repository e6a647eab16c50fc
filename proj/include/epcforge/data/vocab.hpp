// SPDX-License-Identifier: Apache-2.0
//
// Word-level vocabulary shared by natural-language parts and code.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epcforge/data/sample.hpp"

namespace epcforge::data {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kSep = 3;
inline constexpr TokenId kUnk = 4;
/// Part markers for tags, description, input format, output format, samples.
inline constexpr TokenId kFirstPartMarker = 5;
inline constexpr TokenId kNumReserved = kFirstPartMarker + static_cast<TokenId>(kNumParts);

constexpr TokenId part_marker(NlPart part) {
    return kFirstPartMarker + static_cast<TokenId>(part);
}

struct TokenSeq {
    std::vector<TokenId> ids;
    bool truncated = false;

    bool operator==(const TokenSeq&) const = default;
};

/// Maximum sequence lengths per role.
struct RoleCaps {
    std::size_t expert = 512;
    std::size_t integration = 2048;
    std::size_t decoder = 768;

    /// Every cap multiplied by `factor`, never below 8.
    RoleCaps scaled(double factor) const;

    bool operator==(const RoleCaps&) const = default;
};

class Vocabulary {
public:
    /// Reserved symbols only.
    Vocabulary();

    /// Reserved symbols followed by every NL word and code token in the
    /// corpus, sorted.
    static Vocabulary build(std::span<const EpcSample> corpus);

    /// Reserved symbols followed by `words` (in the given order). Throws on
    /// duplicates or reserved names.
    static Vocabulary from_words(const std::vector<std::string>& words);

    std::size_t size() const noexcept { return words_.size(); }
    /// Id of `word`, or kUnk.
    TokenId id(std::string_view word) const;
    bool contains(std::string_view word) const;
    /// Throws std::out_of_range for ids outside the table.
    const std::string& word(TokenId id) const;
    const std::vector<std::string>& words() const noexcept { return words_; }

    bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

private:
    std::vector<std::string> words_;
    std::map<std::string, TokenId, std::less<>> index_;
};

/// Splits NL text into words: runs of letters, digits and '_', plus single
/// punctuation characters. Whitespace separates and is dropped.
std::vector<std::string> nl_words(std::string_view text);

/// Words joined by single spaces.
std::string canonical_nl(std::string_view text);

/// NL text to ids (no EOS). Truncated to `cap` with the flag set.
TokenSeq tokenize_text(std::string_view text, const Vocabulary& vocab, std::size_t cap);

/// One NL part: the part marker followed by its words, truncated to `cap`.
TokenSeq tokenize_part(NlPart part, std::string_view text, const Vocabulary& vocab, std::size_t cap);

/// All five parts of a sample.
std::array<TokenSeq, kNumParts> tokenize_parts(const EpcSample& sample, const Vocabulary& vocab,
                                               std::size_t cap);

/// Code tokens (layout included) followed by EOS. Longer programs keep their
/// first cap-1 tokens plus EOS and set the flag. Throws
/// minilang::ParseError when the source does not lex.
TokenSeq tokenize_code(std::string_view source, const Vocabulary& vocab, std::size_t cap);

/// Words joined by single spaces; reserved ids are skipped.
std::string detokenize_text(std::span<const TokenId> ids, const Vocabulary& vocab);

/// Canonical source. Stops at EOS; BOS and PAD are skipped. Other reserved
/// ids render as their symbol and make the program fail to parse.
std::string detokenize_code(std::span<const TokenId> ids, const Vocabulary& vocab);

}  // namespace epcforge::data
