#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "schemaflow/document.hpp"

namespace schemaflow {

struct ChunkingOptions {
    std::size_t max_chars = 1600;
    std::size_t overlap_chars = 200;
};

namespace detail {

inline bool is_utf8_continuation(char c) {
    return (static_cast<unsigned char>(c) & 0xC0) == 0x80;
}

// Best cut in (lo, hi]: end of the last blank line, else just past the last
// sentence terminator and its trailing whitespace, else hi itself.
inline std::size_t choose_cut(std::string_view text, std::size_t lo, std::size_t hi) {
    if (hi == text.size()) return hi;
    for (std::size_t cut = hi; cut > lo; --cut) {
        if (cut >= 2 && text[cut - 1] == '\n' && text[cut - 2] == '\n') return cut;
    }
    for (std::size_t cut = hi; cut > lo; --cut) {
        // cut sits after whitespace that follows [.!?]
        std::size_t p = cut;
        if (!text::is_space(text[p - 1])) continue;
        while (p > lo && text::is_space(text[p - 1])) --p;
        if (p > 0 && (text[p - 1] == '.' || text[p - 1] == '!' || text[p - 1] == '?')) {
            // do not split the whitespace run; the next chunk starts at a non-space
            if (cut < text.size() && text::is_space(text[cut])) continue;
            return cut;
        }
    }
    std::size_t cut = hi;
    while (cut > lo + 1 && is_utf8_continuation(text[cut])) --cut;
    return cut;
}

}  // namespace detail

/// Splits text into chunks of at most `max_chars` bytes. Chunk i (i > 0)
/// repeats the last min(overlap_chars, |chunk i-1|) bytes of its predecessor,
/// so dropping that prefix and concatenating reproduces the input exactly.
inline std::vector<Chunk> chunk_text(std::string_view full_text, std::size_t max_chars,
                                     std::size_t overlap_chars) {
    require(max_chars > overlap_chars, "chunk_text: max_chars must exceed overlap_chars");
    std::vector<Chunk> out;
    std::size_t prev_start = 0;
    std::size_t prev_end = 0;
    while (prev_end < full_text.size()) {
        std::size_t start =
            out.empty() ? 0 : std::max(prev_start, prev_end - std::min(overlap_chars, prev_end));
        std::size_t hi = std::min(full_text.size(), start + max_chars);
        std::size_t cut = detail::choose_cut(full_text, prev_end, hi);
        Chunk c;
        c.chunk_index = static_cast<std::int64_t>(out.size());
        c.text = std::string(full_text.substr(start, cut - start));
        c.page_number = 1;
        out.push_back(std::move(c));
        prev_start = start;
        prev_end = cut;
    }
    return out;
}

inline std::vector<Chunk> chunk_text(std::string_view full_text, const ChunkingOptions& opts = {}) {
    return chunk_text(full_text, opts.max_chars, opts.overlap_chars);
}

}  // namespace schemaflow
