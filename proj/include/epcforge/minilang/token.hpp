// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace epcforge::minilang {

enum class TokenKind { Keyword, Identifier, Integer, Operator, Delimiter };

std::string_view to_string(TokenKind kind);

// Layout tokens. They are delimiters whose text never collides with source.
inline constexpr std::string_view kNewline = "<nl>";
inline constexpr std::string_view kIndent = "<indent>";
inline constexpr std::string_view kDedent = "<dedent>";

struct Token {
    TokenKind kind = TokenKind::Delimiter;
    std::string text;
    std::size_t offset = 0;

    /// Kind and text; source offsets are ignored.
    bool same(const Token& other) const { return kind == other.kind && text == other.text; }
};

/// Lex or parse failure at a source offset. `expected` lists what the parser
/// would have accepted at that point (empty for lexical errors).
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t offset, const std::string& message,
               std::vector<std::string> expected = {});

    std::size_t offset() const noexcept { return offset_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }
    const std::string& message() const noexcept { return message_; }

private:
    std::size_t offset_;
    std::string message_;
    std::vector<std::string> expected_;
};

bool is_keyword(std::string_view word);

/// Splits source into tokens, emitting <nl> between logical lines and
/// <indent>/<dedent> for block structure. Blank lines are ignored.
/// Throws ParseError on an illegal character or inconsistent indentation.
std::vector<Token> lex(std::string_view source);

/// Reconstructs a token kind from its text (for token streams that went
/// through a vocabulary). Unrecognised text is classified as an identifier.
Token token_from_text(std::string_view text);

/// Joins tokens with canonical spacing and 4-space indentation. Accepts any
/// token stream, including unbalanced layout tokens.
std::string join_tokens(std::span<const Token> tokens);

}  // namespace epcforge::minilang
