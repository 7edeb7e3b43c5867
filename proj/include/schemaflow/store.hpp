#pragma once

// Exact cosine top-k over every evidence segment of the corpus: text chunks,
// linearized tables, and figure summaries.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "schemaflow/document.hpp"
#include "schemaflow/embedding.hpp"
#include "schemaflow/text.hpp"

namespace schemaflow {

enum class Modality : std::uint8_t { Text = 0, Table = 1, Figure = 2 };

constexpr std::string_view to_string(Modality m) {
    switch (m) {
        case Modality::Text: return "text";
        case Modality::Table: return "table";
        case Modality::Figure: return "figure";
    }
    return "text";
}

inline std::optional<Modality> parse_modality(std::string_view s) {
    if (s == "text") return Modality::Text;
    if (s == "table") return Modality::Table;
    if (s == "figure") return Modality::Figure;
    return std::nullopt;
}

/// chunk_index for text, table_id / figure_id otherwise.
using SourceRef = std::variant<std::int64_t, std::string>;

inline json to_json(const SourceRef& ref) {
    return std::holds_alternative<std::int64_t>(ref) ? json(std::get<std::int64_t>(ref))
                                                     : json(std::get<std::string>(ref));
}

inline std::string ref_string(const SourceRef& ref) {
    return std::holds_alternative<std::int64_t>(ref) ? std::to_string(std::get<std::int64_t>(ref))
                                                     : std::get<std::string>(ref);
}

struct StoreEntry {
    std::string entry_id;
    std::string doc_id;
    Modality modality = Modality::Text;
    SourceRef ref;
    std::string text_surrogate;
    EmbeddingVector vector;

    bool operator==(const StoreEntry&) const = default;
};

struct QueryFilter {
    std::optional<std::string> doc_id;
    std::optional<Modality> modality;
};

struct QueryResult {
    std::string entry_id;
    std::string doc_id;
    Modality modality = Modality::Text;
    double score = 0.0;

    bool operator==(const QueryResult&) const = default;
};

inline std::string make_entry_id(const std::string& doc_id, Modality m, const SourceRef& ref) {
    return doc_id + "#" + std::string(to_string(m)) + ":" + ref_string(ref);
}

/// "caption" line, then one "header: cell | header: cell" line per body row.
inline std::string linearize_table(const TableBlock& t) {
    std::vector<std::string> headers;
    std::size_t width = t.cells.empty() ? 0 : t.cells.front().size();
    for (std::size_t c = 0; c < width; ++c) {
        std::vector<std::string> parts;
        for (std::int64_t r = 0; r < t.header_rows; ++r) {
            auto cell = std::string(text::trim(t.cells[static_cast<std::size_t>(r)][c]));
            if (!cell.empty() && (parts.empty() || parts.back() != cell)) parts.push_back(cell);
        }
        headers.push_back(text::join(parts, " "));
    }
    std::string out;
    if (!t.caption.empty()) out += t.caption + "\n";
    for (std::size_t r = static_cast<std::size_t>(t.header_rows); r < t.cells.size(); ++r) {
        std::vector<std::string> cells;
        for (std::size_t c = 0; c < width; ++c) {
            auto cell = std::string(text::trim(t.cells[r][c]));
            cells.push_back(headers[c].empty() ? cell : headers[c] + ": " + cell);
        }
        out += text::join(cells, " | ") + "\n";
    }
    return out;
}

/// Caption plus "axis: …; series: name (n points, y-range a..b)".
inline std::string summarize_figure(const FigureRecord& f) {
    std::string out = f.caption;
    if (!f.structured) return out.empty() ? "figure " + f.figure_id : out;
    std::vector<std::string> axes;
    for (const auto& a : f.structured->axes) {
        std::string s = a.label;
        if (a.unit) s += " (" + *a.unit + ")";
        if (a.scale == AxisScale::Log) s += " [log]";
        axes.push_back(s);
    }
    std::vector<std::string> series;
    for (const auto& s : f.structured->series) {
        std::string line = s.name + " (" + std::to_string(s.points.size()) + " points";
        if (!s.points.empty()) {
            auto [lo, hi] = std::minmax_element(s.points.begin(), s.points.end(),
                                                [](const auto& a, const auto& b) { return a.y < b.y; });
            line += ", y-range " + text::format_number(lo->y) + ".." + text::format_number(hi->y);
        }
        series.push_back(line + ")");
    }
    if (!out.empty()) out += "\n";
    out += "axis: " + text::join(axes, "; ") + "\nseries: " + text::join(series, "; ");
    if (!f.structured->legend.empty()) out += "\nlegend: " + text::join(f.structured->legend, "; ");
    return out;
}

/// Every evidence segment of a document, embedded. Non-scientific figures
/// contribute their caption only.
inline std::vector<StoreEntry> build_entries(const Document& doc, const Embedder& embedder) {
    std::vector<StoreEntry> out;
    for (const auto& c : doc.chunks)
        out.push_back({"", doc.doc_id, Modality::Text, SourceRef{c.chunk_index}, c.text, {}});
    for (const auto& t : doc.tables)
        out.push_back({"", doc.doc_id, Modality::Table, SourceRef{t.table_id}, linearize_table(t), {}});
    for (const auto& f : doc.figures)
        out.push_back({"", doc.doc_id, Modality::Figure, SourceRef{f.figure_id}, summarize_figure(f), {}});
    std::vector<std::string> texts;
    for (auto& e : out) {
        e.entry_id = make_entry_id(e.doc_id, e.modality, e.ref);
        if (text::trim(e.text_surrogate).empty()) e.text_surrogate = e.entry_id;
        texts.push_back(e.text_surrogate);
    }
    auto vectors = embedder.embed_batch(texts);
    require(vectors.size() == out.size(), "embedder returned wrong batch size");
    for (std::size_t i = 0; i < out.size(); ++i) out[i].vector = std::move(vectors[i]);
    return out;
}

class VectorStore {
public:
    static constexpr std::uint8_t kFormatVersion = 1;

    VectorStore(std::size_t dimension, std::string embedder_tag)
        : dimension_(dimension), tag_(std::move(embedder_tag)) {}

    explicit VectorStore(const Embedder& e) : VectorStore(e.dimension(), e.tag()) {}

    std::size_t dimension() const { return dimension_; }
    const std::string& embedder_tag() const { return tag_; }
    std::size_t size() const { return entries_.size(); }
    const std::vector<StoreEntry>& entries() const { return entries_; }

    const StoreEntry* find(const std::string& entry_id) const {
        auto it = by_id_.find(entry_id);
        return it == by_id_.end() ? nullptr : &entries_[it->second];
    }

    std::vector<std::string> doc_ids() const {
        std::vector<std::string> ids;
        for (const auto& e : entries_) ids.push_back(e.doc_id);
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        return ids;
    }

    /// All-or-nothing insert; returns the number of entries added.
    std::size_t index(std::vector<StoreEntry> batch) {
        std::unordered_map<std::string, std::size_t> seen;
        for (const auto& e : batch) {
            if (by_id_.count(e.entry_id) || !seen.emplace(e.entry_id, 0).second)
                throw Error(ErrorCode::DuplicateEntryId, e.entry_id);
            if (e.vector.size() != dimension_)
                throw Error(ErrorCode::DimensionMismatch, e.entry_id,
                            "expected " + std::to_string(dimension_) + ", got " + std::to_string(e.vector.size()));
            for (double x : e.vector.values)
                if (!std::isfinite(x)) throw Error(ErrorCode::InvalidValue, e.entry_id, "non-finite vector");
            if (std::fabs(l2_norm(e.vector) - 1.0) > 1e-9)
                throw Error(ErrorCode::InvalidValue, e.entry_id, "vector is not unit-normalized");
        }
        for (auto& e : batch) {
            by_id_[e.entry_id] = entries_.size();
            entries_.push_back(std::move(e));
        }
        return batch.size();
    }

    /// Exact cosine ranking: descending score, ties by ascending entry_id.
    std::vector<QueryResult> query(const EmbeddingVector& q, std::size_t k, const QueryFilter& filter = {}) const {
        require(k >= 1, "query: k must be >= 1");
        if (q.size() != dimension_) throw Error(ErrorCode::DimensionMismatch, "query");
        struct Scored {
            double score;
            const StoreEntry* entry;
        };
        std::vector<Scored> scored;
        scored.reserve(entries_.size());
        for (const auto& e : entries_) {
            if (filter.doc_id && e.doc_id != *filter.doc_id) continue;
            if (filter.modality && e.modality != *filter.modality) continue;
            scored.push_back({std::clamp(dot(q, e.vector), -1.0, 1.0), &e});
        }
        auto better = [](const Scored& a, const Scored& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.entry->entry_id < b.entry->entry_id;
        };
        auto take = std::min(k, scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
        std::vector<QueryResult> out;
        out.reserve(take);
        for (std::size_t i = 0; i < take; ++i)
            out.push_back({scored[i].entry->entry_id, scored[i].entry->doc_id, scored[i].entry->modality, scored[i].score});
        return out;
    }

    std::vector<QueryResult> query(std::string_view text, const Embedder& embedder, std::size_t k,
                                   const QueryFilter& filter = {}) const {
        if (text::trim(text).empty()) throw Error(ErrorCode::EmptyText, "query");
        if (embedder.tag() != tag_)
            throw Error(ErrorCode::EmbedderMismatch, embedder.tag(), "store was built with " + tag_);
        return query(embedder.embed(text), k, filter);
    }

    // Binary layout (little-endian): "SFVS", u8 version, u32 dimension,
    // str tag, u64 count, then per entry: str id, str doc, u8 modality,
    // u8 ref kind + (i64 | str), str surrogate, f64[dimension].
    void persist(const std::filesystem::path& path) const {
        std::string buf = "SFVS";
        buf.push_back(static_cast<char>(kFormatVersion));
        put_u32(buf, static_cast<std::uint32_t>(dimension_));
        put_str(buf, tag_);
        put_u64(buf, entries_.size());
        for (const auto& e : entries_) {
            put_str(buf, e.entry_id);
            put_str(buf, e.doc_id);
            buf.push_back(static_cast<char>(e.modality));
            if (std::holds_alternative<std::int64_t>(e.ref)) {
                buf.push_back(0);
                put_u64(buf, static_cast<std::uint64_t>(std::get<std::int64_t>(e.ref)));
            } else {
                buf.push_back(1);
                put_str(buf, std::get<std::string>(e.ref));
            }
            put_str(buf, e.text_surrogate);
            for (double x : e.vector.values) {
                std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
                put_u64(buf, bits);
            }
        }
        write_file(path, buf);
    }

    static VectorStore load(const std::filesystem::path& path) {
        std::string data;
        try {
            data = read_file(path);
        } catch (const Error& e) {
            throw Error(ErrorCode::IoFailure, path.string(), e.detail());
        }
        Reader r{data, 0, path.string()};
        if (data.size() < 5 || data.compare(0, 4, "SFVS") != 0)
            throw Error(ErrorCode::IoFailure, path.string(), "not a vector store file");
        r.pos = 4;
        auto version = static_cast<std::uint8_t>(r.byte());
        if (version != kFormatVersion)
            throw Error(ErrorCode::FormatVersionMismatch, path.string(),
                        "file version " + std::to_string(version) + ", expected " + std::to_string(kFormatVersion));
        auto dim = r.u32();
        auto tag = r.str();
        VectorStore store(dim, tag);
        auto count = r.u64();
        std::vector<StoreEntry> entries;
        for (std::uint64_t i = 0; i < count; ++i) {
            StoreEntry e;
            e.entry_id = r.str();
            e.doc_id = r.str();
            auto m = static_cast<std::uint8_t>(r.byte());
            if (m > 2) throw Error(ErrorCode::IoFailure, path.string(), "bad modality tag");
            e.modality = static_cast<Modality>(m);
            if (r.byte() == 0) e.ref = static_cast<std::int64_t>(r.u64());
            else e.ref = r.str();
            e.text_surrogate = r.str();
            e.vector.values.resize(dim);
            for (auto& x : e.vector.values) x = std::bit_cast<double>(r.u64());
            entries.push_back(std::move(e));
        }
        if (r.pos != data.size()) throw Error(ErrorCode::IoFailure, path.string(), "trailing bytes");
        store.index(std::move(entries));
        return store;
    }

private:
    static_assert(std::endian::native == std::endian::little, "store format assumes little-endian");

    static void put_u32(std::string& b, std::uint32_t v) { b.append(reinterpret_cast<const char*>(&v), 4); }
    static void put_u64(std::string& b, std::uint64_t v) { b.append(reinterpret_cast<const char*>(&v), 8); }
    static void put_str(std::string& b, const std::string& s) {
        put_u32(b, static_cast<std::uint32_t>(s.size()));
        b += s;
    }

    struct Reader {
        const std::string& data;
        std::size_t pos;
        std::string origin;

        void need(std::size_t n) {
            if (data.size() - pos < n) throw Error(ErrorCode::IoFailure, origin, "truncated store file");
        }
        char byte() {
            need(1);
            return data[pos++];
        }
        std::uint32_t u32() {
            need(4);
            std::uint32_t v;
            std::memcpy(&v, data.data() + pos, 4);
            pos += 4;
            return v;
        }
        std::uint64_t u64() {
            need(8);
            std::uint64_t v;
            std::memcpy(&v, data.data() + pos, 8);
            pos += 8;
            return v;
        }
        std::string str() {
            auto n = u32();
            need(n);
            std::string s = data.substr(pos, n);
            pos += n;
            return s;
        }
    };

    std::size_t dimension_;
    std::string tag_;
    std::vector<StoreEntry> entries_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace schemaflow
