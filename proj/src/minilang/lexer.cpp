// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <limits>

#include "epcforge/minilang/token.hpp"

namespace epcforge::minilang {

namespace {

constexpr std::array<std::string_view, 16> kKeywords = {
    "def", "for", "in", "range", "while", "if", "else", "return",
    "print", "and", "or", "not", "len", "append", "read", "has"};

// Keywords written with call syntax: no space before their '('.
constexpr std::array<std::string_view, 6> kCallKeywords = {"range", "print", "len",
                                                           "append", "read", "has"};

constexpr std::array<std::string_view, 12> kOperators = {"==", "!=", "<=", ">=", "<", ">",
                                                         "=",  "+",  "-",  "*", "/", "%"};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_operand_end(const Token& t) {
    return t.kind == TokenKind::Identifier || t.kind == TokenKind::Integer || t.text == ")" ||
           t.text == "]" || t.text == "}";
}

}  // namespace

std::string_view to_string(TokenKind kind) {
    switch (kind) {
        case TokenKind::Keyword: return "keyword";
        case TokenKind::Identifier: return "identifier";
        case TokenKind::Integer: return "integer";
        case TokenKind::Operator: return "operator";
        case TokenKind::Delimiter: return "delimiter";
    }
    return "unknown";
}

ParseError::ParseError(std::size_t offset, const std::string& message,
                       std::vector<std::string> expected)
    : std::runtime_error([&] {
          std::string what = "offset " + std::to_string(offset) + ": " + message;
          if (!expected.empty()) {
              what += " (expected ";
              for (std::size_t i = 0; i < expected.size(); ++i) {
                  if (i) what += ", ";
                  what += expected[i];
              }
              what += ")";
          }
          return what;
      }()),
      offset_(offset),
      message_(message),
      expected_(std::move(expected)) {}

bool is_keyword(std::string_view word) {
    return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

std::vector<Token> lex(std::string_view source) {
    std::vector<Token> out;
    std::vector<std::size_t> indents{0};
    bool first_line = true;
    std::size_t pos = 0;
    std::size_t prev_line_end = 0;
    while (pos < source.size()) {
        const std::size_t line_start = pos;
        std::size_t line_end = source.find('\n', pos);
        if (line_end == std::string_view::npos) line_end = source.size();
        pos = line_end + 1;

        std::size_t i = line_start;
        while (i < line_end && source[i] == ' ') ++i;
        const std::size_t indent = i - line_start;
        std::size_t probe = i;
        while (probe < line_end && (source[probe] == ' ' || source[probe] == '\t' || source[probe] == '\r')) ++probe;
        if (probe == line_end) continue;  // blank line
        if (source[i] == '\t') throw ParseError(i, "tab in indentation");

        if (!first_line) {
            out.push_back({TokenKind::Delimiter, std::string(kNewline), prev_line_end});
            if (indent > indents.back()) {
                indents.push_back(indent);
                out.push_back({TokenKind::Delimiter, std::string(kIndent), i});
            } else {
                while (indent < indents.back()) {
                    indents.pop_back();
                    out.push_back({TokenKind::Delimiter, std::string(kDedent), i});
                }
                if (indent != indents.back()) throw ParseError(i, "inconsistent dedent");
            }
        } else if (indent != 0) {
            throw ParseError(i, "unexpected indentation");
        }
        first_line = false;
        prev_line_end = line_end;

        while (i < line_end) {
            const char c = source[i];
            if (c == ' ' || c == '\t' || c == '\r') {
                ++i;
                continue;
            }
            if (is_ident_start(c)) {
                std::size_t j = i;
                while (j < line_end && is_ident_char(source[j])) ++j;
                std::string word(source.substr(i, j - i));
                const TokenKind kind = is_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier;
                out.push_back({kind, std::move(word), i});
                i = j;
                continue;
            }
            if (is_digit(c)) {
                std::size_t j = i;
                while (j < line_end && is_digit(source[j])) ++j;
                if (j < line_end && is_ident_start(source[j])) {
                    throw ParseError(j, "illegal character '" + std::string(1, source[j]) + "' after integer");
                }
                std::int64_t value = 0;
                const auto res = std::from_chars(source.data() + i, source.data() + j, value);
                if (res.ec != std::errc{}) throw ParseError(i, "integer literal out of range");
                out.push_back({TokenKind::Integer, std::string(source.substr(i, j - i)), i});
                i = j;
                continue;
            }
            bool matched = false;
            for (std::string_view op : kOperators) {
                if (source.substr(i, op.size()) == op) {
                    out.push_back({TokenKind::Operator, std::string(op), i});
                    i += op.size();
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
            if (std::string_view("()[]{},:").find(c) != std::string_view::npos) {
                out.push_back({TokenKind::Delimiter, std::string(1, c), i});
                ++i;
                continue;
            }
            throw ParseError(i, "illegal character '" + std::string(1, c) + "'");
        }
    }
    while (indents.size() > 1) {
        indents.pop_back();
        out.push_back({TokenKind::Delimiter, std::string(kDedent), source.size()});
    }
    return out;
}

Token token_from_text(std::string_view text) {
    Token t;
    t.text = std::string(text);
    if (text == kNewline || text == kIndent || text == kDedent) {
        t.kind = TokenKind::Delimiter;
    } else if (!text.empty() && std::all_of(text.begin(), text.end(), is_digit)) {
        t.kind = TokenKind::Integer;
    } else if (is_keyword(text)) {
        t.kind = TokenKind::Keyword;
    } else if (std::find(kOperators.begin(), kOperators.end(), text) != kOperators.end()) {
        t.kind = TokenKind::Operator;
    } else if (text.size() == 1 && std::string_view("()[]{},:").find(text[0]) != std::string_view::npos) {
        t.kind = TokenKind::Delimiter;
    } else {
        t.kind = TokenKind::Identifier;
    }
    return t;
}

std::string join_tokens(std::span<const Token> tokens) {
    std::string out;
    std::size_t level = 0;
    bool line_start = true;
    const Token* prev = nullptr;
    const Token* prev2 = nullptr;
    for (const Token& t : tokens) {
        if (t.text == kNewline) {
            out += '\n';
            line_start = true;
            prev = prev2 = nullptr;
            continue;
        }
        if (t.text == kIndent) {
            ++level;
            continue;
        }
        if (t.text == kDedent) {
            if (level > 0) --level;
            continue;
        }
        if (line_start) {
            out.append(4 * level, ' ');
            line_start = false;
        } else if (prev) {
            bool space = true;
            const std::string& p = prev->text;
            const std::string& c = t.text;
            if (p == "(" || p == "[" || p == "{") space = false;
            if (c == ")" || c == "]" || c == "}" || c == "," || c == ":") space = false;
            if (c == "(" && (prev->kind == TokenKind::Identifier ||
                             std::find(kCallKeywords.begin(), kCallKeywords.end(), p) != kCallKeywords.end())) {
                space = false;
            }
            if (c == "[" && (prev->kind == TokenKind::Identifier || p == ")" || p == "]")) space = false;
            if (p == "-" && !(prev2 && is_operand_end(*prev2))) space = false;  // unary minus
            if (space) out += ' ';
        }
        out += t.text;
        prev2 = prev;
        prev = &t;
    }
    return out;
}

}  // namespace epcforge::minilang
