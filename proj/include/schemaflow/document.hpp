#pragma once

// Canonical parsed-publication model: text chunks, tables, figures and page
// images. This JSON form is the contract between the PDF bridge and the engine.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "schemaflow/json_util.hpp"
#include "schemaflow/text.hpp"

namespace schemaflow {

struct Chunk {
    std::int64_t chunk_index = 0;
    std::string text;
    std::int64_t page_number = 1;
    std::optional<std::string> section_hint;

    bool operator==(const Chunk&) const = default;
};

enum class AxisScale { Linear, Log };
enum class CaptionSource { Extracted, Generated };

struct AxisSpec {
    std::string label;
    std::optional<std::string> unit;
    AxisScale scale = AxisScale::Linear;

    bool operator==(const AxisSpec&) const = default;
};

struct SeriesPoint {
    std::variant<double, std::string> x;
    double y = 0.0;

    bool operator==(const SeriesPoint&) const = default;
};

struct Series {
    std::string name;
    std::vector<SeriesPoint> points;

    bool operator==(const Series&) const = default;
};

struct FigureJson {
    std::vector<AxisSpec> axes;
    std::vector<std::string> legend;
    std::vector<Series> series;

    bool operator==(const FigureJson&) const = default;
};

struct FigureRecord {
    std::string figure_id;
    std::int64_t page_number = 1;
    std::string caption;
    CaptionSource caption_source = CaptionSource::Extracted;
    bool is_scientific = false;
    std::optional<FigureJson> structured;

    bool operator==(const FigureRecord&) const = default;
};

struct TableBlock {
    std::string table_id;
    std::int64_t page_number = 1;
    std::string caption;
    std::vector<std::vector<std::string>> cells;  // row-major, rectangular
    std::int64_t header_rows = 0;

    bool operator==(const TableBlock&) const = default;
};

struct PageImageRef {
    std::int64_t page_number = 1;
    std::string uri;

    bool operator==(const PageImageRef&) const = default;
};

struct Document {
    std::string doc_id;
    std::optional<std::string> title;
    std::vector<Chunk> chunks;
    std::vector<TableBlock> tables;
    std::vector<FigureRecord> figures;
    std::vector<PageImageRef> page_images;
    std::string source_uri;

    bool operator==(const Document&) const = default;
};

namespace detail {

inline FigureJson parse_figure_json(const json& raw, const std::string& path) {
    require_object(raw, path);
    FigureJson fig;
    const auto& axes = get_array(raw, "axes", path, false);
    for (std::size_t i = 0; i < axes.size(); ++i) {
        auto p = index_path(join_path(path, "axes"), i);
        require_object(axes[i], p);
        AxisSpec axis;
        axis.label = get_string(axes[i], "label", p);
        axis.unit = get_opt_string(axes[i], "unit", p);
        auto scale = get_opt_string(axes[i], "scale", p).value_or("linear");
        if (scale == "linear") axis.scale = AxisScale::Linear;
        else if (scale == "log") axis.scale = AxisScale::Log;
        else throw Error(ErrorCode::InvalidValue, join_path(p, "scale"), "expected linear|log");
        fig.axes.push_back(std::move(axis));
    }
    const auto& legend = get_array(raw, "legend", path, false);
    for (std::size_t i = 0; i < legend.size(); ++i) {
        if (!legend[i].is_string())
            throw Error(ErrorCode::InvalidValue, index_path(join_path(path, "legend"), i),
                        "expected string");
        fig.legend.push_back(legend[i].get<std::string>());
    }
    const auto& series = get_array(raw, "series", path, false);
    for (std::size_t i = 0; i < series.size(); ++i) {
        auto p = index_path(join_path(path, "series"), i);
        require_object(series[i], p);
        Series s;
        s.name = get_string(series[i], "name", p);
        const auto& points = get_array(series[i], "points", p);
        for (std::size_t j = 0; j < points.size(); ++j) {
            auto pp = index_path(join_path(p, "points"), j);
            const json* x = nullptr;
            const json* y = nullptr;
            if (points[j].is_array() && points[j].size() == 2) {
                x = &points[j][0];
                y = &points[j][1];
            } else if (points[j].is_object()) {
                x = find(points[j], "x");
                y = find(points[j], "y");
            }
            if (!x || !y) throw Error(ErrorCode::MissingField, pp, "point needs x and y");
            SeriesPoint pt;
            if (x->is_number()) pt.x = x->get<double>();
            else if (x->is_string()) pt.x = x->get<std::string>();
            else throw Error(ErrorCode::InvalidValue, join_path(pp, "x"), "expected number or string");
            if (!y->is_number() || !std::isfinite(y->get<double>()))
                throw Error(ErrorCode::InvalidValue, join_path(pp, "y"), "y must be a finite number");
            pt.y = y->get<double>();
            s.points.push_back(std::move(pt));
        }
        fig.series.push_back(std::move(s));
    }
    return fig;
}

inline std::string cell_text(const json& cell, const std::string& path) {
    if (cell.is_string()) return cell.get<std::string>();
    if (cell.is_null()) return {};
    if (cell.is_number() || cell.is_boolean()) return cell.dump();
    throw Error(ErrorCode::InvalidValue, path, "table cell must be scalar");
}

inline Document validate_document_impl(const json& raw) {
    require_object(raw, "$");
    Document doc;

    auto doc_id = get_opt_string(raw, "doc_id", "");
    if (!doc_id || text::trim(*doc_id).empty()) throw Error(ErrorCode::MissingField, "doc_id");
    doc.doc_id = *doc_id;
    doc.title = get_opt_string(raw, "title", "");
    doc.source_uri = get_opt_string(raw, "source_uri", "").value_or("");

    std::set<std::int64_t> pages;
    const auto& images = get_array(raw, "page_images", "", false);
    for (std::size_t i = 0; i < images.size(); ++i) {
        auto p = index_path("page_images", i);
        require_object(images[i], p);
        PageImageRef ref;
        ref.page_number = get_int(images[i], "page_number", p);
        if (ref.page_number < 1)
            throw Error(ErrorCode::InvalidValue, join_path(p, "page_number"), "must be >= 1");
        ref.uri = get_string(images[i], "uri", p);
        if (ref.uri.empty()) throw Error(ErrorCode::MissingField, join_path(p, "uri"));
        if (!pages.insert(ref.page_number).second)
            throw Error(ErrorCode::DuplicateId, join_path(p, "page_number"),
                        "page " + std::to_string(ref.page_number) + " listed twice");
        doc.page_images.push_back(std::move(ref));
    }

    const auto& chunks = get_array(raw, "chunks", "");
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        auto p = index_path("chunks", i);
        require_object(chunks[i], p);
        Chunk c;
        c.chunk_index = get_int(chunks[i], "chunk_index", p);
        if (c.chunk_index != static_cast<std::int64_t>(i))
            throw Error(ErrorCode::InvalidValue, join_path(p, "chunk_index"),
                        "chunk indices must be 0..n-1 in order");
        c.text = get_string(chunks[i], "text", p);
        if (text::trim(c.text).empty())
            throw Error(ErrorCode::MissingField, join_path(p, "text"), "blank chunk text");
        c.page_number = get_int(chunks[i], "page_number", p);
        if (c.page_number < 1)
            throw Error(ErrorCode::InvalidValue, join_path(p, "page_number"), "must be >= 1");
        c.section_hint = get_opt_string(chunks[i], "section_hint", p);
        doc.chunks.push_back(std::move(c));
    }

    auto check_page = [&](std::int64_t page, const std::string& p) {
        if (!pages.count(page))
            throw Error(ErrorCode::BadReference, join_path(p, "page_number"),
                        "page " + std::to_string(page) + " has no page image");
    };

    std::set<std::string> table_ids;
    const auto& tables = get_array(raw, "tables", "", false);
    for (std::size_t i = 0; i < tables.size(); ++i) {
        auto p = index_path("tables", i);
        require_object(tables[i], p);
        TableBlock t;
        t.table_id = get_string(tables[i], "table_id", p);
        if (t.table_id.empty()) throw Error(ErrorCode::MissingField, join_path(p, "table_id"));
        if (!table_ids.insert(t.table_id).second)
            throw Error(ErrorCode::DuplicateId, join_path(p, "table_id"), t.table_id);
        t.page_number = get_int(tables[i], "page_number", p);
        check_page(t.page_number, p);
        t.caption = get_opt_string(tables[i], "caption", p).value_or("");
        const auto& rows = get_array(tables[i], "cells", p, false);
        std::size_t width = 0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            auto rp = index_path(join_path(p, "cells"), r);
            if (!rows[r].is_array()) throw Error(ErrorCode::InvalidValue, rp, "expected array");
            std::vector<std::string> row;
            for (std::size_t c = 0; c < rows[r].size(); ++c)
                row.push_back(cell_text(rows[r][c], index_path(rp, c)));
            width = std::max(width, row.size());
            t.cells.push_back(std::move(row));
        }
        for (auto& row : t.cells) row.resize(width);  // pad ragged rows
        t.header_rows = find(tables[i], "header_rows") ? get_int(tables[i], "header_rows", p) : 0;
        if (t.header_rows < 0 || t.header_rows > static_cast<std::int64_t>(t.cells.size()))
            throw Error(ErrorCode::InvalidValue, join_path(p, "header_rows"),
                        "must be within 0..row count");
        doc.tables.push_back(std::move(t));
    }

    std::set<std::string> figure_ids;
    const auto& figures = get_array(raw, "figures", "", false);
    for (std::size_t i = 0; i < figures.size(); ++i) {
        auto p = index_path("figures", i);
        require_object(figures[i], p);
        FigureRecord f;
        f.figure_id = get_string(figures[i], "figure_id", p);
        if (f.figure_id.empty()) throw Error(ErrorCode::MissingField, join_path(p, "figure_id"));
        if (!figure_ids.insert(f.figure_id).second)
            throw Error(ErrorCode::DuplicateId, join_path(p, "figure_id"), f.figure_id);
        f.page_number = get_int(figures[i], "page_number", p);
        check_page(f.page_number, p);
        f.caption = get_opt_string(figures[i], "caption", p).value_or("");
        auto source = get_opt_string(figures[i], "caption_source", p).value_or("extracted");
        if (source == "extracted") f.caption_source = CaptionSource::Extracted;
        else if (source == "generated") f.caption_source = CaptionSource::Generated;
        else
            throw Error(ErrorCode::InvalidValue, join_path(p, "caption_source"),
                        "expected extracted|generated");
        f.is_scientific = get_bool(figures[i], "is_scientific", p, false);
        if (const json* s = find(figures[i], "structured")) {
            if (!f.is_scientific)
                throw Error(ErrorCode::InvalidValue, join_path(p, "structured"),
                            "structured data only allowed on scientific figures");
            f.structured = parse_figure_json(*s, join_path(p, "structured"));
        }
        doc.figures.push_back(std::move(f));
    }
    return doc;
}

}  // namespace detail

/// Validates raw JSON against the canonical document contract. Total: any
/// input yields a Document or throws schemaflow::Error naming the offending path.
inline Document validate_document(const json& raw) {
    try {
        return detail::validate_document_impl(raw);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::InvalidValue, "$", e.what());
    }
}

inline json figure_json_to_json(const FigureJson& fig) {
    json axes = json::array();
    for (const auto& a : fig.axes) {
        json axis = {{"label", a.label}, {"scale", a.scale == AxisScale::Log ? "log" : "linear"}};
        if (a.unit) axis["unit"] = *a.unit;
        axes.push_back(std::move(axis));
    }
    json series = json::array();
    for (const auto& s : fig.series) {
        json points = json::array();
        for (const auto& pt : s.points) {
            json x = std::holds_alternative<double>(pt.x) ? json(std::get<double>(pt.x))
                                                          : json(std::get<std::string>(pt.x));
            points.push_back({{"x", x}, {"y", pt.y}});
        }
        series.push_back({{"name", s.name}, {"points", points}});
    }
    return {{"axes", axes}, {"legend", fig.legend}, {"series", series}};
}

inline json to_json(const Document& doc) {
    json out;
    out["doc_id"] = doc.doc_id;
    if (doc.title) out["title"] = *doc.title;
    out["source_uri"] = doc.source_uri;
    out["chunks"] = json::array();
    for (const auto& c : doc.chunks) {
        json chunk = {{"chunk_index", c.chunk_index}, {"text", c.text}, {"page_number", c.page_number}};
        if (c.section_hint) chunk["section_hint"] = *c.section_hint;
        out["chunks"].push_back(std::move(chunk));
    }
    out["tables"] = json::array();
    for (const auto& t : doc.tables) {
        out["tables"].push_back({{"table_id", t.table_id},
                                 {"page_number", t.page_number},
                                 {"caption", t.caption},
                                 {"cells", t.cells},
                                 {"header_rows", t.header_rows}});
    }
    out["figures"] = json::array();
    for (const auto& f : doc.figures) {
        json fig = {{"figure_id", f.figure_id},
                    {"page_number", f.page_number},
                    {"caption", f.caption},
                    {"caption_source",
                     f.caption_source == CaptionSource::Generated ? "generated" : "extracted"},
                    {"is_scientific", f.is_scientific}};
        if (f.structured) fig["structured"] = figure_json_to_json(*f.structured);
        out["figures"].push_back(std::move(fig));
    }
    out["page_images"] = json::array();
    for (const auto& p : doc.page_images)
        out["page_images"].push_back({{"page_number", p.page_number}, {"uri", p.uri}});
    return out;
}

/// A validated document together with the file it came from.
struct LoadedDocument {
    Document document;
    std::string origin;
};

/// Reads one document per `.json` file, or one per line for `.jsonl`.
inline std::vector<LoadedDocument> load_documents(const std::filesystem::path& path) {
    std::vector<LoadedDocument> out;
    auto contents = read_file(path);
    if (path.extension() == ".jsonl") {
        std::size_t line = 0;
        for (auto& raw : parse_json_lines(contents, path.string())) {
            ++line;
            try {
                out.push_back({validate_document(raw), path.string() + ":" + std::to_string(line)});
            } catch (const Error& e) {
                throw Error(e.code(), path.string() + ":" + std::to_string(line) + ": " + e.path(),
                            e.detail());
            }
        }
        return out;
    }
    auto raw = json::parse(contents, nullptr, false);
    if (raw.is_discarded()) throw Error(ErrorCode::InvalidValue, path.string(), "malformed JSON");
    try {
        out.push_back({validate_document(raw), path.string()});
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.path(), e.detail());
    }
    return out;
}

}  // namespace schemaflow
