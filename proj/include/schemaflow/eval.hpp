#pragma once

// Scores an extracted table against ground truth: field similarity, candidate
// filtering on key fields, optimal one-to-one row matching, then P/R/F1 and
// field accuracy.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "schemaflow/aggregate.hpp"
#include "schemaflow/assignment.hpp"
#include "schemaflow/schema.hpp"

namespace schemaflow {

enum class StringNormalizer { Exact, CasefoldTrim, Canonicalized };
enum class AccuracyScope { NonKeyFields, AllFields };

struct MatchConfig {
    std::vector<std::string> key_fields;  // empty: use the schema's key fields
    double numeric_rel_tol = 0.05;
    double numeric_abs_tol = 1e-6;
    StringNormalizer string_normalizer = StringNormalizer::CasefoldTrim;
    double candidate_threshold = 0.5;
    AccuracyScope accuracy_scope = AccuracyScope::NonKeyFields;
    CanonMap canon_map;  // used by StringNormalizer::Canonicalized

    void validate(const Schema& schema) const {
        if (!(numeric_rel_tol >= 0.0) || !(numeric_abs_tol >= 0.0))
            throw Error(ErrorCode::ConfigError, "eval", "tolerances must be non-negative");
        if (!(candidate_threshold >= 0.0 && candidate_threshold <= 1.0))
            throw Error(ErrorCode::ConfigError, "eval.candidate_threshold", "must lie in [0,1]");
        if (key_fields.empty()) throw Error(ErrorCode::ConfigError, "eval.key_fields", "must be non-empty");
        for (const auto& k : key_fields)
            if (!schema.find(k)) throw Error(ErrorCode::ConfigError, "eval.key_fields", "unknown field " + k);
    }

    /// Fills key_fields from the schema when unset, then validates.
    MatchConfig resolved(const Schema& schema) const {
        MatchConfig out = *this;
        if (out.key_fields.empty()) out.key_fields = schema.key_fields();
        out.validate(schema);
        return out;
    }

    static MatchConfig from_json(const json& raw) {
        MatchConfig c;
        if (raw.is_null()) return c;
        if (!raw.is_object()) throw Error(ErrorCode::ConfigError, "eval", "expected an object");
        try {
            if (raw.contains("key_fields")) c.key_fields = raw["key_fields"].get<std::vector<std::string>>();
            c.numeric_rel_tol = raw.value("numeric_rel_tol", c.numeric_rel_tol);
            c.numeric_abs_tol = raw.value("numeric_abs_tol", c.numeric_abs_tol);
            c.candidate_threshold = raw.value("candidate_threshold", c.candidate_threshold);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ConfigError, "eval", e.what());
        }
        auto norm = raw.value("string_normalizer", std::string("casefold_trim"));
        if (norm == "exact") c.string_normalizer = StringNormalizer::Exact;
        else if (norm == "casefold_trim") c.string_normalizer = StringNormalizer::CasefoldTrim;
        else if (norm == "canonicalized") c.string_normalizer = StringNormalizer::Canonicalized;
        else throw Error(ErrorCode::ConfigError, "eval.string_normalizer", norm);
        auto scope = raw.value("accuracy_scope", std::string("non_key_fields"));
        if (scope == "non_key_fields") c.accuracy_scope = AccuracyScope::NonKeyFields;
        else if (scope == "all_fields") c.accuracy_scope = AccuracyScope::AllFields;
        else throw Error(ErrorCode::ConfigError, "eval.accuracy_scope", scope);
        return c;
    }
};

using EvalRow = std::map<std::string, json>;

namespace detail {

inline std::string normalize_string(const std::string& s, const MatchConfig& cfg) {
    switch (cfg.string_normalizer) {
        case StringNormalizer::Exact: return s;
        case StringNormalizer::CasefoldTrim: return text::casefold_trim(s);
        case StringNormalizer::Canonicalized: return text::casefold_trim(cfg.canon_map.canon(text::trim(s)));
    }
    return s;
}

inline bool scalar_equal(const json& a, const json& b, const MatchConfig& cfg) {
    if (a.is_number() && b.is_number()) {
        double x = a.get<double>(), y = b.get<double>();
        return std::fabs(x - y) <= std::max(cfg.numeric_abs_tol, cfg.numeric_rel_tol * std::fabs(y));
    }
    if (a.is_string() && b.is_string()) return normalize_string(a.get<std::string>(), cfg) == normalize_string(b.get<std::string>(), cfg);
    return a == b;
}

}  // namespace detail

/// 1 or 0. Numeric tolerance is relative to `b`, the ground-truth side.
inline double field_similarity(const json& a, const json& b, const FieldSpec&, const MatchConfig& cfg) {
    if (a.is_null() && b.is_null()) return 1.0;
    if (a.is_null() || b.is_null()) return 0.0;
    if (a.is_array() != b.is_array()) return 0.0;
    if (!a.is_array()) return detail::scalar_equal(a, b, cfg) ? 1.0 : 0.0;
    if (a.size() != b.size()) return 0.0;
    std::vector<json> xs(a.begin(), a.end()), ys(b.begin(), b.end());
    std::sort(xs.begin(), xs.end(), json_less{});
    std::sort(ys.begin(), ys.end(), json_less{});
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (!detail::scalar_equal(xs[i], ys[i], cfg)) return 0.0;
    return 1.0;
}

inline json row_value(const EvalRow& row, const std::string& field) {
    auto it = row.find(field);
    return it == row.end() ? json() : it->second;
}

struct Candidate {
    std::size_t ext_index = 0;
    double key_similarity = 0.0;
};

/// Mean key-field similarity of `ext` against `gt`.
inline double key_similarity(const EvalRow& gt, const EvalRow& ext, const Schema& schema, const MatchConfig& cfg) {
    require(!cfg.key_fields.empty(), "key_similarity: key_fields must be non-empty");
    double sum = 0.0;
    for (const auto& k : cfg.key_fields) {
        const FieldSpec* f = schema.find(k);
        require(f != nullptr, "key_similarity: key field missing from schema");
        sum += field_similarity(row_value(ext, k), row_value(gt, k), *f, cfg);
    }
    return sum / static_cast<double>(cfg.key_fields.size());
}

inline std::vector<Candidate> candidate_matches(const EvalRow& gt, const std::vector<EvalRow>& ext, const Schema& schema,
                                                const MatchConfig& cfg) {
    std::vector<Candidate> out;
    for (std::size_t j = 0; j < ext.size(); ++j) {
        double s = key_similarity(gt, ext[j], schema, cfg);
        if (s >= cfg.candidate_threshold) out.push_back({j, s});
    }
    std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        return a.key_similarity > b.key_similarity;
    });
    return out;
}

struct MatchPair {
    std::size_t gt_index = 0;
    std::size_t ext_index = 0;
    double similarity = 0.0;

    bool operator==(const MatchPair&) const = default;
};

struct MatchResult {
    std::vector<MatchPair> pairs;  // sorted by gt_index
    std::vector<std::size_t> unmatched_gt;
    std::vector<std::size_t> unmatched_ext;

    double total_weight() const {
        double s = 0.0;
        for (const auto& p : pairs) s += p.similarity;
        return s;
    }
};

/// Edge weight matrix: weights[i][j] is the similarity of gt row i and ext
/// row j, or nullopt where no edge exists.
using WeightMatrix = std::vector<std::vector<std::optional<double>>>;

namespace detail {

/// forced[i]: -2 free, -1 unmatched, j >= 0 matched to column j.
inline std::optional<std::vector<int>> constrained_assignment(const WeightMatrix& w, std::size_t m,
                                                              const std::vector<int>& forced, double big) {
    const std::size_t n = w.size();
    std::vector<int> column_owner(m, -1);
    for (std::size_t i = 0; i < n; ++i)
        if (forced[i] >= 0) column_owner[static_cast<std::size_t>(forced[i])] = static_cast<int>(i);

    // real columns 0..m-1, then one "unmatched" column per row
    std::vector<std::vector<double>> cost(n, std::vector<double>(m + n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            bool allowed = w[i][j].has_value() && forced[i] != -1 &&
                           (forced[i] < 0 || forced[i] == static_cast<int>(j)) &&
                           (column_owner[j] < 0 || column_owner[j] == static_cast<int>(i));
            cost[i][j] = allowed ? -*w[i][j] : big;
        }
        if (forced[i] >= 0)
            for (std::size_t d = 0; d < n; ++d) cost[i][m + d] = big;
    }
    auto cols = solve_assignment(cost);
    std::vector<int> out(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (cost[i][static_cast<std::size_t>(cols[i])] >= big) return std::nullopt;
        if (cols[i] < static_cast<int>(m)) out[i] = cols[i];
    }
    return out;
}

inline double assignment_weight(const WeightMatrix& w, const std::vector<int>& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] >= 0) s += *w[i][static_cast<std::size_t>(a[i])];
    return s;
}

}  // namespace detail

/// Maximum-total-weight matching. Among optimal matchings, picks the one
/// whose per-gt-row assignment vector (unmatched sorting last) is smallest.
inline MatchResult max_weight_matching(const WeightMatrix& w, std::size_t n_ext) {
    const std::size_t n = w.size();
    MatchResult result;
    if (n == 0 || n_ext == 0) {
        for (std::size_t i = 0; i < n; ++i) result.unmatched_gt.push_back(i);
        for (std::size_t j = 0; j < n_ext; ++j) result.unmatched_ext.push_back(j);
        return result;
    }
    double big = 1.0;
    for (const auto& row : w) {
        require(row.size() == n_ext, "max_weight_matching: ragged weight matrix");
        for (const auto& x : row) {
            if (!x) continue;
            require(std::isfinite(*x) && *x >= 0.0, "max_weight_matching: weights must be finite and non-negative");
            big += *x;
        }
    }
    big *= 4.0;

    std::vector<int> forced(n, -2);
    auto best = detail::constrained_assignment(w, n_ext, forced, big);
    require(best.has_value(), "max_weight_matching: unconstrained problem must be feasible");
    const double optimum = detail::assignment_weight(w, *best);
    const double eps = 1e-9 * std::max(1.0, optimum);

    std::vector<char> taken(n_ext, 0);
    for (std::size_t i = 0; i < n; ++i) {
        int current = (*best)[i];
        std::size_t limit = current < 0 ? n_ext : static_cast<std::size_t>(current);
        for (std::size_t j = 0; j < limit; ++j) {
            if (!w[i][j] || taken[j]) continue;
            forced[i] = static_cast<int>(j);
            auto trial = detail::constrained_assignment(w, n_ext, forced, big);
            if (trial && std::fabs(detail::assignment_weight(w, *trial) - optimum) <= eps) {
                best = trial;
                current = static_cast<int>(j);
                break;
            }
        }
        forced[i] = current < 0 ? -1 : current;
        if (current >= 0) taken[static_cast<std::size_t>(current)] = 1;
    }

    for (std::size_t i = 0; i < n; ++i) {
        int j = (*best)[i];
        if (j < 0) result.unmatched_gt.push_back(i);
        else result.pairs.push_back({i, static_cast<std::size_t>(j), *w[i][static_cast<std::size_t>(j)]});
    }
    for (std::size_t j = 0; j < n_ext; ++j)
        if (!taken[j]) result.unmatched_ext.push_back(j);
    return result;
}

/// Optimal one-to-one matching over the candidate graph (edges only where key
/// similarity reaches the threshold).
inline MatchResult bipartite_match(const std::vector<EvalRow>& gt, const std::vector<EvalRow>& ext, const Schema& schema,
                                   const MatchConfig& cfg) {
    WeightMatrix w(gt.size(), std::vector<std::optional<double>>(ext.size()));
    for (std::size_t i = 0; i < gt.size(); ++i)
        for (const auto& c : candidate_matches(gt[i], ext, schema, cfg)) w[i][c.ext_index] = c.key_similarity;
    return max_weight_matching(w, ext.size());
}

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    std::map<std::string, double> per_field_accuracy;
    std::size_t n_gt = 0;
    std::size_t n_ext = 0;
    std::size_t n_matched = 0;
    std::size_t fields_correct = 0;
    std::size_t fields_total = 0;
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_field_counts;  // correct, total
};

namespace detail {

inline double ratio(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

inline void finish_metrics(Metrics& m) {
    m.precision = ratio(m.n_matched, m.n_ext);
    m.recall = ratio(m.n_matched, m.n_gt);
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.accuracy = ratio(m.fields_correct, m.fields_total);
    m.per_field_accuracy.clear();
    for (const auto& [field, counts] : m.per_field_counts)
        m.per_field_accuracy[field] = ratio(counts.first, counts.second);
}

}  // namespace detail

inline Metrics compute_metrics(const MatchResult& match, const std::vector<EvalRow>& gt, const std::vector<EvalRow>& ext,
                               const Schema& schema, const MatchConfig& cfg) {
    Metrics m;
    m.n_gt = gt.size();
    m.n_ext = ext.size();
    m.n_matched = match.pairs.size();
    std::set<std::string> keys(cfg.key_fields.begin(), cfg.key_fields.end());
    for (const auto& f : schema.fields) {
        if (cfg.accuracy_scope == AccuracyScope::NonKeyFields && keys.count(f.name)) continue;
        auto& counts = m.per_field_counts[f.name];
        for (const auto& p : match.pairs) {
            ++counts.second;
            if (field_similarity(row_value(ext[p.ext_index], f.name), row_value(gt[p.gt_index], f.name), f, cfg) == 1.0)
                ++counts.first;
        }
        m.fields_correct += counts.first;
        m.fields_total += counts.second;
    }
    detail::finish_metrics(m);
    return m;
}

inline json to_json(const Metrics& m) {
    return {{"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"accuracy", m.accuracy},
            {"per_field_accuracy", m.per_field_accuracy},
            {"counts", {{"n_gt", m.n_gt}, {"n_ext", m.n_ext}, {"n_matched", m.n_matched},
                        {"fields_correct", m.fields_correct}, {"fields_total", m.fields_total}}}};
}

inline json to_json(const MatchResult& r) {
    json pairs = json::array();
    for (const auto& p : r.pairs) pairs.push_back({{"gt", p.gt_index}, {"ext", p.ext_index}, {"similarity", p.similarity}});
    return {{"pairs", pairs}, {"unmatched_gt", r.unmatched_gt}, {"unmatched_ext", r.unmatched_ext}};
}

// ---------------------------------------------------------------------------
// Tables on disk

/// Rows plus the documents each row is attributed to (empty when unknown).
struct EvalTable {
    std::vector<EvalRow> rows;
    std::vector<std::set<std::string>> doc_ids;
};

namespace detail {

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text, const std::string& origin) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false, row_has_content = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            row_has_content = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
            row_has_content = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (row_has_content || !cell.empty()) {
                row.push_back(std::move(cell));
                rows.push_back(std::move(row));
            }
            row.clear();
            cell.clear();
            row_has_content = false;
        } else {
            cell += c;
            row_has_content = true;
        }
    }
    if (quoted) throw Error(ErrorCode::InvalidValue, origin, "unterminated quoted field");
    if (row_has_content || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Coerces to the schema dtype and expresses numbers in the field's unit.
inline std::optional<json> normalize_cell(const FieldSpec& f, const json& raw, const UnitTable& units) {
    auto c = coerce_json(f, raw, units);
    if (!c.ok()) return std::nullopt;
    if (c.value.is_null() || !c.unit || !f.unit || *c.unit == *f.unit) return c.value;
    auto rule = units.conversion(*c.unit, *f.unit);
    if (!rule) return std::nullopt;
    auto convert = [&](const json& v) -> json {
        double x = rule->apply(v.get<double>());
        if (f.dtype.base == BaseType::Integer) return static_cast<std::int64_t>(std::llround(x));
        return x;
    };
    json v = c.value;
    if (v.is_array())
        for (auto& item : v) item = convert(item);
    else
        v = convert(v);
    return v;
}

}  // namespace detail

/// Ground truth CSV: header row of field names; an extra `doc_id` column
/// attributes rows to papers (several ids separated by ';'). Cells that do
/// not coerce are errors.
inline EvalTable load_ground_truth_csv(const std::filesystem::path& path, const Schema& schema,
                                       const UnitTable& units = default_unit_table()) {
    auto origin = path.string();
    auto rows = detail::parse_csv(read_file(path), origin);
    EvalTable out;
    if (rows.empty()) return out;
    const auto& header = rows[0];
    std::optional<std::size_t> doc_col;
    for (std::size_t c = 0; c < header.size(); ++c) {
        auto name = std::string(text::trim(header[c]));
        if (name == "doc_id" && !schema.find(name)) doc_col = c;
        else if (!schema.find(name)) throw Error(ErrorCode::InvalidValue, origin, "unknown column '" + name + "'");
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto where = origin + ":" + std::to_string(r + 1);
        if (rows[r].size() != header.size())
            throw Error(ErrorCode::InvalidValue, where, "expected " + std::to_string(header.size()) + " cells");
        EvalRow row;
        std::set<std::string> docs;
        for (std::size_t c = 0; c < header.size(); ++c) {
            auto cell = std::string(text::trim(rows[r][c]));
            if (doc_col && c == *doc_col) {
                for (const auto& id : text::split(cell, ';'))
                    if (!text::trim(id).empty()) docs.insert(std::string(text::trim(id)));
                continue;
            }
            const FieldSpec& f = *schema.find(std::string(text::trim(header[c])));
            if (cell.empty()) {
                row[f.name] = nullptr;
                continue;
            }
            auto v = detail::normalize_cell(f, cell, units);
            if (!v) throw Error(ErrorCode::InvalidValue, where + "." + f.name, "cannot coerce '" + cell + "'");
            row[f.name] = *v;
        }
        out.rows.push_back(std::move(row));
        out.doc_ids.push_back(std::move(docs));
    }
    return out;
}

/// Accepts a unified table (rows with `values` and `support`) or an array of
/// plain field objects (optionally with `doc_id`). Uncoercible extracted
/// values score as null.
inline EvalTable table_from_eval_json(const json& raw, const Schema& schema, const UnitTable& units = default_unit_table(),
                                      bool strict = false, const std::string& origin = "table") {
    if (!raw.is_array()) throw Error(ErrorCode::InvalidValue, origin, "expected an array of rows");
    EvalTable out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto where = detail::index_path(origin, i);
        const json& item = raw[i];
        detail::require_object(item, where);
        const json* values = item.contains("values") && item["values"].is_object() ? &item["values"] : &item;
        std::set<std::string> docs;
        if (const json* support = detail::find(item, "support"); support && values != &item)
            for (const auto& [field, list] : support->items())
                for (const auto& s : list)
                    if (s.is_object() && s.contains("doc_id") && s["doc_id"].is_string()) docs.insert(s["doc_id"].get<std::string>());
        if (values == &item && item.contains("doc_id") && item["doc_id"].is_string())
            docs.insert(item["doc_id"].get<std::string>());
        EvalRow row;
        for (const auto& f : schema.fields) {
            const json* v = detail::find(*values, f.name.c_str());
            if (!v) {
                row[f.name] = nullptr;
                continue;
            }
            auto norm = detail::normalize_cell(f, *v, units);
            if (!norm && strict) throw Error(ErrorCode::InvalidValue, where + "." + f.name, "cannot coerce " + v->dump());
            row[f.name] = norm ? *norm : json();
        }
        out.rows.push_back(std::move(row));
        out.doc_ids.push_back(std::move(docs));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
    Metrics corpus;
    MatchResult corpus_match;
    std::map<std::string, Metrics> per_paper;
};

inline EvalReport evaluate(const EvalTable& gt, const EvalTable& ext, const Schema& schema, const MatchConfig& config) {
    auto cfg = config.resolved(schema);
    EvalReport report;
    report.corpus_match = bipartite_match(gt.rows, ext.rows, schema, cfg);
    report.corpus = compute_metrics(report.corpus_match, gt.rows, ext.rows, schema, cfg);

    std::set<std::string> papers;
    for (const auto& docs : gt.doc_ids) papers.insert(docs.begin(), docs.end());
    for (const auto& paper : papers) {
        std::vector<EvalRow> g, e;
        for (std::size_t i = 0; i < gt.rows.size(); ++i)
            if (gt.doc_ids[i].count(paper)) g.push_back(gt.rows[i]);
        for (std::size_t j = 0; j < ext.rows.size(); ++j)
            if (ext.doc_ids[j].count(paper)) e.push_back(ext.rows[j]);
        report.per_paper[paper] = compute_metrics(bipartite_match(g, e, schema, cfg), g, e, schema, cfg);
    }
    return report;
}

inline json per_paper_json(const EvalReport& r) {
    json out = json::object();
    for (const auto& [paper, m] : r.per_paper) out[paper] = to_json(m);
    return out;
}

/// Corpus-level metrics plus the macro mean over papers.
inline json summary_json(const EvalReport& r) {
    json out = {{"corpus", to_json(r.corpus)}, {"match", to_json(r.corpus_match)}, {"n_papers", r.per_paper.size()}};
    if (!r.per_paper.empty()) {
        double p = 0, rc = 0, f = 0, a = 0;
        for (const auto& [paper, m] : r.per_paper) {
            p += m.precision;
            rc += m.recall;
            f += m.f1;
            a += m.accuracy;
        }
        double n = static_cast<double>(r.per_paper.size());
        out["macro"] = {{"precision", p / n}, {"recall", rc / n}, {"f1", f / n}, {"accuracy", a / n}};
    }
    return out;
}

/// Plain-text table with one row per dataset/paper: P, R, F1, Acc.
inline std::string metrics_text_table(const EvalReport& r, const std::string& dataset = "corpus") {
    std::size_t width = std::max<std::size_t>(7, dataset.size());
    for (const auto& [paper, m] : r.per_paper) width = std::max(width, paper.size() + 2);
    auto line = [&](const std::string& label, const std::string& a, const std::string& b, const std::string& c,
                    const std::string& d) {
        char buf[512];
        std::snprintf(buf, sizeof buf, "%-*s  %6s  %6s  %6s  %6s\n", static_cast<int>(width), label.c_str(), a.c_str(),
                      b.c_str(), c.c_str(), d.c_str());
        return std::string(buf);
    };
    auto num = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", x);
        return std::string(buf);
    };
    std::string out = line("Dataset", "P", "R", "F1", "Acc");
    out += line(dataset, num(r.corpus.precision), num(r.corpus.recall), num(r.corpus.f1), num(r.corpus.accuracy));
    for (const auto& [paper, m] : r.per_paper)
        out += line("  " + paper, num(m.precision), num(m.recall), num(m.f1), num(m.accuracy));
    return out;
}

}  // namespace schemaflow
