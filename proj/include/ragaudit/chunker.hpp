#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragaudit/dataset.hpp"
#include "ragaudit/tokenizer.hpp"

namespace ragaudit {

struct ContextChunk {
    std::size_t index = 0;
    std::string text;
    std::size_t token_count = 0;
};

namespace detail {

struct LineRange {
    std::size_t begin = 0;
    std::size_t end = 0;  // includes the trailing newline when present
    bool table = false;
};

inline std::vector<LineRange> split_lines(std::string_view text) {
    std::vector<LineRange> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::size_t end = (nl == std::string_view::npos) ? text.size() : nl + 1;
        LineRange lr{pos, end, false};
        std::size_t p = pos;
        while (p < end && (text[p] == ' ' || text[p] == '\t')) ++p;
        lr.table = (p < end && text[p] == '|');
        lines.push_back(lr);
        pos = end;
    }
    return lines;
}

inline bool is_table_separator_row(std::string_view row) {
    bool has_dash = false;
    for (char c : row) {
        if (c == '-') {
            has_dash = true;
        } else if (c != '|' && c != ':' && c != ' ' && c != '\t' && c != '\n' && c != '\r') {
            return false;
        }
    }
    return has_dash;
}

struct TableInfo {
    std::string header_prefix;       // header + separator rows, newline-terminated
    std::size_t header_tokens = 0;
    std::size_t n_header_rows = 0;   // 0 = no duplication for this table
};

struct ChunkUnit {
    std::size_t tok_begin = 0;
    std::size_t tok_end = 0;
    int table_id = -1;
    std::size_t row_index = 0;  // within its table block
};

// Sentence boundaries: terminal . ! ? followed by whitespace or the end of
// the region; whatever trails the last terminal forms a final unit.
inline void append_sentence_units(std::string_view text, std::size_t region_begin,
                                  std::size_t region_end, const std::vector<TokenSpan>& tokens,
                                  std::size_t& tok_cursor, std::vector<ChunkUnit>& units) {
    std::size_t sent_begin = region_begin;
    auto emit = [&](std::size_t sent_end) {
        std::size_t tb = tok_cursor;
        while (tok_cursor < tokens.size() && tokens[tok_cursor].begin < sent_end) ++tok_cursor;
        if (tok_cursor > tb) units.push_back({tb, tok_cursor, -1, 0});
    };
    for (std::size_t i = region_begin; i < region_end; ++i) {
        char c = text[i];
        if (c == '.' || c == '!' || c == '?') {
            bool at_end = (i + 1 >= region_end);
            if (at_end || is_space_byte(text[i + 1])) {
                emit(i + 1);
                sent_begin = i + 1;
            }
        }
    }
    if (sent_begin < region_end) emit(region_end);
}

}  // namespace detail

// Split `text` into chunks of at most `chunk_size` tokens. Chunks partition
// the text at token boundaries, so concatenating them in index order
// reconstructs it exactly — except for the table header rows that
// preservation mode duplicates at the top of continuation chunks.
//
// With preserve_structure on, sentences are kept intact unless a single
// sentence exceeds chunk_size (then it is hard-split at a token boundary),
// and markdown table blocks that must be split carry their header and
// separator rows into each continuation chunk.
inline std::vector<ContextChunk> chunk_text(const std::string& text, std::size_t chunk_size,
                                            bool preserve_structure, const Tokenizer& tokenizer) {
    if (chunk_size == 0) throw Error("chunk_text requires chunk_size > 0");
    std::vector<ContextChunk> chunks;
    const std::vector<TokenSpan> tokens = tokenizer.spans(text);
    if (tokens.empty()) return chunks;

    struct Pending {
        std::size_t first_tok = 0;
        std::size_t count = 0;  // includes duplicated header tokens
        int prefix_table = -1;
    };
    std::vector<Pending> packed;
    std::vector<detail::TableInfo> tables;

    if (!preserve_structure) {
        for (std::size_t t = 0; t < tokens.size(); t += chunk_size) {
            packed.push_back({t, std::min(chunk_size, tokens.size() - t), -1});
        }
    } else {
        std::vector<detail::LineRange> lines = detail::split_lines(text);
        std::vector<detail::ChunkUnit> units;
        std::size_t tok_cursor = 0;
        std::size_t li = 0;
        while (li < lines.size()) {
            if (!lines[li].table) {
                std::size_t region_begin = lines[li].begin;
                while (li < lines.size() && !lines[li].table) ++li;
                std::size_t region_end = (li < lines.size()) ? lines[li].begin : text.size();
                detail::append_sentence_units(text, region_begin, region_end, tokens, tok_cursor,
                                              units);
                continue;
            }
            // Table block: one unit per row.
            std::size_t block_begin = li;
            while (li < lines.size() && lines[li].table) ++li;
            std::size_t block_end = li;
            detail::TableInfo info;
            if (block_end - block_begin >= 2) {
                std::string_view row1(text.data() + lines[block_begin + 1].begin,
                                      lines[block_begin + 1].end - lines[block_begin + 1].begin);
                if (detail::is_table_separator_row(row1)) {
                    info.header_prefix.assign(text, lines[block_begin].begin,
                                              lines[block_begin + 1].end - lines[block_begin].begin);
                    if (info.header_prefix.empty() || info.header_prefix.back() != '\n') {
                        info.header_prefix.push_back('\n');
                    }
                    info.header_tokens = tokenizer.count(info.header_prefix);
                    info.n_header_rows = 2;
                }
            }
            int table_id = static_cast<int>(tables.size());
            tables.push_back(std::move(info));
            for (std::size_t row = block_begin; row < block_end; ++row) {
                std::size_t tb = tok_cursor;
                while (tok_cursor < tokens.size() && tokens[tok_cursor].begin < lines[row].end) {
                    ++tok_cursor;
                }
                if (tok_cursor > tb) {
                    units.push_back({tb, tok_cursor, table_id, row - block_begin});
                }
            }
        }

        std::optional<Pending> cur;
        auto flush = [&] {
            if (cur) {
                packed.push_back(*cur);
                cur.reset();
            }
        };
        auto table_prefix_for = [&](const detail::ChunkUnit& u, bool first_group) -> int {
            if (u.table_id < 0) return -1;
            const detail::TableInfo& info = tables[static_cast<std::size_t>(u.table_id)];
            if (info.n_header_rows == 0) return -1;
            bool continuation = !first_group || u.row_index >= info.n_header_rows;
            if (!continuation) return -1;
            // A header as large as the chunk leaves no room; skip duplication.
            if (info.header_tokens >= chunk_size) return -1;
            return u.table_id;
        };

        for (const detail::ChunkUnit& u : units) {
            std::size_t n = u.tok_end - u.tok_begin;
            if (cur && cur->count + n <= chunk_size) {
                cur->count += n;
                continue;
            }
            flush();
            std::size_t pos = u.tok_begin;
            bool first_group = true;
            while (pos < u.tok_end) {
                int prefix_table = table_prefix_for(u, first_group);
                std::size_t prefix_tokens =
                    prefix_table >= 0 ? tables[static_cast<std::size_t>(prefix_table)].header_tokens
                                      : 0;
                std::size_t capacity = chunk_size - prefix_tokens;
                std::size_t take = std::min(capacity, u.tok_end - pos);
                cur = Pending{pos, take + prefix_tokens, prefix_table};
                pos += take;
                if (pos < u.tok_end) flush();  // close every group but the last
                first_group = false;
            }
        }
        flush();
    }

    chunks.reserve(packed.size());
    for (std::size_t k = 0; k < packed.size(); ++k) {
        std::size_t begin = (k == 0) ? 0 : tokens[packed[k].first_tok].begin;
        std::size_t end =
            (k + 1 < packed.size()) ? tokens[packed[k + 1].first_tok].begin : text.size();
        std::string body = text.substr(begin, end - begin);
        if (packed[k].prefix_table >= 0) {
            body = tables[static_cast<std::size_t>(packed[k].prefix_table)].header_prefix + body;
        }
        std::size_t count = tokenizer.count(body);
        chunks.push_back({k, std::move(body), count});
    }
    return chunks;
}

// Documents are concatenated with their title lines before chunking; the
// full-context raters see the same rendering.
inline std::vector<ContextChunk> chunk_context(const std::vector<ContextDocument>& context,
                                               std::size_t chunk_size, bool preserve_structure,
                                               const Tokenizer& tokenizer) {
    return chunk_text(flatten_context(context), chunk_size, preserve_structure, tokenizer);
}

}  // namespace ragaudit
