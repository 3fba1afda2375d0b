#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>

#include "ragaudit/tokenizer.hpp"

namespace ragaudit {

// Fixed 40-entry stop-word list, version 1. Matching behavior must be
// reproducible, so the list ships with the library and changes only with
// a version bump.
inline constexpr int kStopWordsVersion = 1;

inline const std::array<std::string_view, 40>& stop_words() {
    static const std::array<std::string_view, 40> words = {
        "a",    "an",   "the",  "of",    "in",    "on",    "at",    "to",
        "for",  "and",  "or",   "but",   "is",    "are",   "was",   "were",
        "be",   "been", "being", "am",   "by",    "with",  "from",  "as",
        "that", "this", "these", "those", "it",   "its",   "he",    "she",
        "they", "we",   "you",  "i",     "his",   "her",   "their", "them"};
    return words;
}

inline bool is_stop_word(std::string_view token) {
    for (std::string_view w : stop_words()) {
        if (w == token) return true;
    }
    return false;
}

namespace detail {

inline std::uint32_t decode_cp(std::string_view s, std::size_t pos, std::size_t* len) {
    unsigned char lead = static_cast<unsigned char>(s[pos]);
    std::size_t n = utf8_len(lead);
    if (pos + n > s.size()) n = 1;
    *len = n;
    switch (n) {
        case 2:
            return (static_cast<std::uint32_t>(lead & 0x1f) << 6) |
                   (static_cast<std::uint32_t>(s[pos + 1]) & 0x3f);
        case 3:
            return (static_cast<std::uint32_t>(lead & 0x0f) << 12) |
                   ((static_cast<std::uint32_t>(s[pos + 1]) & 0x3f) << 6) |
                   (static_cast<std::uint32_t>(s[pos + 2]) & 0x3f);
        case 4:
            return (static_cast<std::uint32_t>(lead & 0x07) << 18) |
                   ((static_cast<std::uint32_t>(s[pos + 1]) & 0x3f) << 12) |
                   ((static_cast<std::uint32_t>(s[pos + 2]) & 0x3f) << 6) |
                   (static_cast<std::uint32_t>(s[pos + 3]) & 0x3f);
        default:
            return lead;
    }
}

// Punctuation classes removed by normalize(): ASCII punctuation, the
// General Punctuation block (dashes, curly quotes, ellipses), and the
// common Latin-1 marks. Removal joins the surrounding characters,
// matching exact-match QA normalizers.
inline bool is_punct_cp(std::uint32_t cp) {
    if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
    if (cp >= 0x2010 && cp <= 0x2027) return true;  // dashes, quotes, daggers
    if (cp >= 0x2030 && cp <= 0x205e) return true;  // permille .. punctuation marks
    if (cp == 0x00a1 || cp == 0x00bf || cp == 0x00ab || cp == 0x00bb) return true;
    return false;
}

inline bool is_space_cp(std::uint32_t cp) {
    if (cp < 0x80) return std::isspace(static_cast<int>(cp)) != 0;
    if (cp == 0x00a0 || cp == 0x3000) return true;
    if (cp >= 0x2000 && cp <= 0x200b) return true;
    if (cp == 0x2028 || cp == 0x2029 || cp == 0x205f) return true;
    return false;
}

}  // namespace detail

// Lowercase, strip punctuation (joining what remains), drop stop words,
// collapse whitespace to single spaces. Idempotent.
inline std::string normalize(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    std::string token;
    auto flush_token = [&] {
        if (!token.empty() && !is_stop_word(token)) {
            if (!out.empty()) out.push_back(' ');
            out += token;
        }
        token.clear();
    };
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t len = 0;
        std::uint32_t cp = detail::decode_cp(text, pos, &len);
        if (detail::is_space_cp(cp)) {
            flush_token();
        } else if (!detail::is_punct_cp(cp)) {
            if (cp < 0x80) {
                token.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
            } else {
                token.append(text.substr(pos, len));
            }
        }
        pos += len;
    }
    flush_token();
    return out;
}

}  // namespace ragaudit
