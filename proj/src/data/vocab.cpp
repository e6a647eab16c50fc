// SPDX-License-Identifier: Apache-2.0

#include "epcforge/data/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

#include "epcforge/minilang/token.hpp"

namespace epcforge::data {

namespace {

const std::array<std::string, kNumReserved> kReservedWords = {
    "<pad>", "<bos>", "<eos>", "<sep>", "<unk>", "<tags>", "<desc>", "<infmt>", "<outfmt>", "<samples>"};

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

RoleCaps RoleCaps::scaled(double factor) const {
    auto scale = [factor](std::size_t cap) {
        return std::max<std::size_t>(8, static_cast<std::size_t>(std::llround(factor * static_cast<double>(cap))));
    };
    return {scale(expert), scale(integration), scale(decoder)};
}

Vocabulary::Vocabulary() {
    for (const std::string& w : kReservedWords) {
        index_.emplace(w, static_cast<TokenId>(words_.size()));
        words_.push_back(w);
    }
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
    Vocabulary v;
    for (const std::string& w : words) {
        if (!v.index_.emplace(w, static_cast<TokenId>(v.words_.size())).second) {
            throw std::invalid_argument("duplicate vocabulary entry '" + w + "'");
        }
        v.words_.push_back(w);
    }
    return v;
}

Vocabulary Vocabulary::build(std::span<const EpcSample> corpus) {
    std::set<std::string> seen;
    auto add_code = [&](const std::string& source) {
        for (const minilang::Token& t : minilang::lex(source)) seen.insert(t.text);
    };
    for (const EpcSample& s : corpus) {
        for (const std::string& part : split_nl(s)) {
            for (std::string& w : nl_words(part)) seen.insert(std::move(w));
        }
        add_code(s.inefficient_code);
        for (const std::string& code : s.efficient_codes) add_code(code);
    }
    for (const std::string& w : kReservedWords) seen.erase(w);
    return from_words({seen.begin(), seen.end()});
}

TokenId Vocabulary::id(std::string_view word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const { return index_.find(word) != index_.end(); }

const std::string& Vocabulary::word(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
        throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of " +
                                std::to_string(words_.size()));
    }
    return words_[static_cast<std::size_t>(id)];
}

std::vector<std::string> nl_words(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (is_word_char(c)) {
            std::size_t j = i;
            while (j < text.size() && is_word_char(text[j])) ++j;
            out.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            out.emplace_back(1, c);
            ++i;
        }
    }
    return out;
}

std::string canonical_nl(std::string_view text) {
    std::string out;
    for (const std::string& w : nl_words(text)) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

TokenSeq tokenize_text(std::string_view text, const Vocabulary& vocab, std::size_t cap) {
    TokenSeq seq;
    for (const std::string& w : nl_words(text)) {
        if (seq.ids.size() == cap) {
            seq.truncated = true;
            break;
        }
        seq.ids.push_back(vocab.id(w));
    }
    return seq;
}

TokenSeq tokenize_part(NlPart part, std::string_view text, const Vocabulary& vocab, std::size_t cap) {
    if (cap == 0) throw std::invalid_argument("part cap must be positive");
    TokenSeq words = tokenize_text(text, vocab, cap - 1);
    TokenSeq seq;
    seq.ids.reserve(words.ids.size() + 1);
    seq.ids.push_back(part_marker(part));
    seq.ids.insert(seq.ids.end(), words.ids.begin(), words.ids.end());
    seq.truncated = words.truncated;
    return seq;
}

std::array<TokenSeq, kNumParts> tokenize_parts(const EpcSample& sample, const Vocabulary& vocab,
                                               std::size_t cap) {
    const auto parts = split_nl(sample);
    std::array<TokenSeq, kNumParts> out;
    for (std::size_t p = 0; p < kNumParts; ++p) {
        out[p] = tokenize_part(static_cast<NlPart>(p), parts[p], vocab, cap);
    }
    return out;
}

TokenSeq tokenize_code(std::string_view source, const Vocabulary& vocab, std::size_t cap) {
    if (cap == 0) throw std::invalid_argument("code cap must be positive");
    const std::vector<minilang::Token> tokens = minilang::lex(source);
    TokenSeq seq;
    for (const minilang::Token& t : tokens) {
        if (seq.ids.size() + 1 == cap) {
            seq.truncated = true;
            break;
        }
        seq.ids.push_back(vocab.id(t.text));
    }
    seq.ids.push_back(kEos);
    return seq;
}

std::string detokenize_text(std::span<const TokenId> ids, const Vocabulary& vocab) {
    std::string out;
    for (TokenId id : ids) {
        if (id < kNumReserved) continue;
        if (!out.empty()) out += ' ';
        out += vocab.word(id);
    }
    return out;
}

std::string detokenize_code(std::span<const TokenId> ids, const Vocabulary& vocab) {
    std::vector<minilang::Token> tokens;
    for (TokenId id : ids) {
        if (id == kEos) break;
        if (id == kBos || id == kPad) continue;
        tokens.push_back(minilang::token_from_text(vocab.word(id)));
    }
    return minilang::join_tokens(tokens);
}

}  // namespace epcforge::data
