#pragma once

#include <cctype>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ragaudit/core.hpp"

namespace ragaudit {

// Half-open byte range of one token within the tokenized text.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Every token count in this library refers to the configured tokenizer.
// Implementations must be deterministic and must produce non-overlapping
// spans in increasing order; text between spans is separator material.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    virtual std::string id() const = 0;
    virtual void append_spans(std::string_view text, std::vector<TokenSpan>& out) const = 0;

    std::vector<TokenSpan> spans(std::string_view text) const {
        std::vector<TokenSpan> out;
        append_spans(text, out);
        return out;
    }

    std::size_t count(std::string_view text) const {
        std::vector<TokenSpan> out;
        append_spans(text, out);
        return out.size();
    }

    // Longest prefix of `text` holding at most `max_tokens` tokens, cut at
    // the end of the last whole token that fits.
    std::string_view prefix(std::string_view text, std::size_t max_tokens) const {
        std::vector<TokenSpan> all = spans(text);
        if (all.size() <= max_tokens) return text;
        if (max_tokens == 0) return text.substr(0, 0);
        return text.substr(0, all[max_tokens - 1].end);
    }
};

namespace detail {

// Byte length of the UTF-8 sequence starting at `lead`; malformed leads
// count as single bytes so every input advances.
inline std::size_t utf8_len(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xe) return 3;
    if ((lead >> 3) == 0x1e) return 4;
    return 1;
}

inline bool is_space_byte(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace detail

// Default deterministic approximation: split on whitespace, then split any
// run longer than `max_run` code points into `max_run`-code-point pieces.
class ApproxTokenizer final : public Tokenizer {
public:
    explicit ApproxTokenizer(std::size_t max_run = 8) : max_run_(max_run) {}

    std::string id() const override { return "approx8"; }

    void append_spans(std::string_view text, std::vector<TokenSpan>& out) const override {
        std::size_t i = 0;
        const std::size_t n = text.size();
        while (i < n) {
            while (i < n && detail::is_space_byte(text[i])) ++i;
            if (i >= n) break;
            std::size_t word_begin = i;
            while (i < n && !detail::is_space_byte(text[i])) ++i;
            std::size_t word_end = i;
            std::size_t piece_begin = word_begin;
            std::size_t cp_count = 0;
            std::size_t pos = word_begin;
            while (pos < word_end) {
                pos += detail::utf8_len(static_cast<unsigned char>(text[pos]));
                if (pos > word_end) pos = word_end;
                ++cp_count;
                if (cp_count == max_run_) {
                    out.push_back({piece_begin, pos});
                    piece_begin = pos;
                    cp_count = 0;
                }
            }
            if (piece_begin < word_end) out.push_back({piece_begin, word_end});
        }
    }

private:
    std::size_t max_run_;
};

// Plain whitespace splitting, no run limit.
class WhitespaceTokenizer final : public Tokenizer {
public:
    std::string id() const override { return "whitespace"; }

    void append_spans(std::string_view text, std::vector<TokenSpan>& out) const override {
        std::size_t i = 0;
        const std::size_t n = text.size();
        while (i < n) {
            while (i < n && detail::is_space_byte(text[i])) ++i;
            if (i >= n) break;
            std::size_t begin = i;
            while (i < n && !detail::is_space_byte(text[i])) ++i;
            out.push_back({begin, i});
        }
    }
};

inline std::shared_ptr<const Tokenizer> make_tokenizer(const std::string& id) {
    if (id == "approx8" || id.empty()) return std::make_shared<ApproxTokenizer>();
    if (id == "whitespace") return std::make_shared<WhitespaceTokenizer>();
    throw ConfigError("unknown tokenizer id: " + id);
}

}  // namespace ragaudit
