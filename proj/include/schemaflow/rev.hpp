#pragma once

// Closed retrieval / extraction / verification loop over one document.
//
// Round 1 asks for every schema field. Each later round re-queries only the
// fields verification left pending (null required fields and fields below the
// confidence threshold), one targeted request per record, anchored on the
// record's known key values. The loop stops once nothing is pending or the
// round budget is spent.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "schemaflow/gateway.hpp"
#include "schemaflow/records.hpp"
#include "schemaflow/schema.hpp"
#include "schemaflow/store.hpp"

namespace schemaflow {

struct RevConfig {
    std::size_t k = 5;
    int max_rounds = 3;
    double confidence_threshold = 0.7;
    std::string profile = "extractor";
    int max_repairs = 2;
};

inline void validate(const RevConfig& c) {
    if (c.k < 1) throw Error(ErrorCode::ConfigError, "rev.k", "must be >= 1");
    if (c.max_rounds < 1) throw Error(ErrorCode::ConfigError, "rev.max_rounds", "must be >= 1");
    if (!(c.confidence_threshold >= 0.0 && c.confidence_threshold <= 1.0))
        throw Error(ErrorCode::ConfigError, "rev.confidence_threshold", "must be in [0,1]");
}

/// One retrieval query per pending field. With a prior record, its non-null
/// key values are appended as context anchors.
inline std::vector<std::string> formulate_queries(const Schema& schema, const std::vector<std::string>& pending,
                                                  const ExtractionRecord* prior = nullptr) {
    require(!pending.empty(), "formulate_queries: pending must be non-empty");
    std::vector<std::string> anchors;
    if (prior) {
        for (const auto& f : schema.fields) {
            if (!f.is_key || prior->is_null(f.name)) continue;
            if (std::find(pending.begin(), pending.end(), f.name) != pending.end()) continue;
            anchors.push_back(f.name + "=" + value_to_string(prior->values.at(f.name)));
        }
    }
    std::vector<std::string> out;
    for (const auto& name : pending) {
        const FieldSpec* f = schema.find(name);
        require(f != nullptr, "formulate_queries: unknown field " + name);
        std::string q = f->name + " (" + to_string(f->dtype);
        if (f->unit) q += ", " + *f->unit;
        q += ")";
        if (!f->description.empty()) q += ": " + f->description;
        if (!schema.description.empty()) q += "; topic: " + schema.description;
        if (!anchors.empty()) q += " | context: " + text::join(anchors, "; ");
        out.push_back(std::move(q));
    }
    return out;
}

/// Union of per-query top-k hits inside one document, best score first.
inline std::vector<QueryResult> retrieve(const std::vector<std::string>& queries, const VectorStore& store,
                                         const Embedder& embedder, const std::string& doc_id, std::size_t k) {
    std::map<std::string, QueryResult> best;
    for (const auto& q : queries) {
        for (auto& hit : store.query(q, embedder, k, QueryFilter{doc_id, std::nullopt})) {
            auto it = best.find(hit.entry_id);
            if (it == best.end()) best.emplace(hit.entry_id, hit);
            else if (hit.score > it->second.score) it->second = hit;
        }
    }
    std::vector<QueryResult> out;
    for (auto& [id, hit] : best) out.push_back(hit);
    std::sort(out.begin(), out.end(), [](const QueryResult& a, const QueryResult& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.entry_id < b.entry_id;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Extraction

/// One field of a model-proposed row, after coercion.
struct ExtractedCell {
    json value;  // null when absent or not coercible
    std::optional<double> confidence;
    std::vector<std::string> cited;
    std::optional<std::string> unit;
    std::optional<std::string> failure;
};

using ExtractedRow = std::map<std::string, ExtractedCell>;

namespace detail {

inline ExtractedCell parse_cell(const FieldSpec& f, const json& raw, const UnitTable& units) {
    ExtractedCell cell;
    const json* value = &raw;
    std::optional<std::string> stated_unit;
    if (raw.is_object()) {
        static const json null_value = nullptr;
        auto v = raw.find("value");
        value = v == raw.end() ? &null_value : &*v;
        if (auto c = raw.find("confidence"); c != raw.end() && !c->is_null()) {
            if (!c->is_number()) throw Error(ErrorCode::InvalidValue, f.name + ".confidence", "expected number");
            cell.confidence = std::clamp(c->get<double>(), 0.0, 1.0);
        }
        if (auto e = raw.find("evidence"); e != raw.end() && !e->is_null()) {
            if (e->is_string()) cell.cited.push_back(e->get<std::string>());
            else if (e->is_array()) {
                for (const auto& id : *e) {
                    if (!id.is_string()) throw Error(ErrorCode::InvalidValue, f.name + ".evidence", "expected strings");
                    cell.cited.push_back(id.get<std::string>());
                }
            } else {
                throw Error(ErrorCode::InvalidValue, f.name + ".evidence", "expected list of entry ids");
            }
        }
        if (auto u = raw.find("unit"); u != raw.end() && u->is_string() && !text::trim(u->get<std::string>()).empty())
            stated_unit = units.canonical_symbol(u->get<std::string>());
    }
    auto coerced = coerce_json(f, *value, units);
    if (!coerced.ok()) {
        cell.value = nullptr;
        cell.failure = coerced.failure;
        return cell;
    }
    cell.value = coerced.value;
    cell.unit = coerced.unit ? coerced.unit : (cell.value.is_null() ? std::nullopt : stated_unit);
    return cell;
}

}  // namespace detail

/// Expects {"rows": [{field: {"value", "confidence", "evidence", "unit"} | bare value}]}.
/// Unknown field names are rejected (triggering repair); values that fail
/// coercion become null with the failure kept on the cell.
inline StructuredTarget rows_target(const Schema& schema, const UnitTable& units = default_unit_table()) {
    json shape_doc = to_json(schema);
    return {"{\"rows\": [{<field>: {\"value\": ..., \"confidence\": 0..1, \"evidence\": [entry_id, ...]}}]} "
            "for schema " + shape_doc.dump(),
            [schema, units](const json& value) {
                const json* rows = &value;
                if (value.is_object()) {
                    auto it = value.find("rows");
                    if (it == value.end()) throw Error(ErrorCode::MissingField, "rows");
                    rows = &*it;
                }
                if (!rows->is_array()) throw Error(ErrorCode::InvalidValue, "rows", "expected an array of rows");
                json out = json::array();
                for (std::size_t i = 0; i < rows->size(); ++i) {
                    const json& row = (*rows)[i];
                    if (!row.is_object())
                        throw Error(ErrorCode::InvalidValue, detail::index_path("rows", i), "row must be an object");
                    json normalized_row = json::object();
                    for (const auto& [name, raw] : row.items()) {
                        const FieldSpec* f = schema.find(name);
                        if (!f) throw Error(ErrorCode::UnknownKey, detail::index_path("rows", i) + "." + name);
                        auto cell = detail::parse_cell(*f, raw, units);
                        normalized_row[name] = {{"value", cell.value},
                                                {"confidence", cell.confidence ? json(*cell.confidence) : json()},
                                                {"evidence", cell.cited},
                                                {"unit", cell.unit ? json(*cell.unit) : json()},
                                                {"failure", cell.failure ? json(*cell.failure) : json()}};
                    }
                    out.push_back(std::move(normalized_row));
                }
                return out;
            }};
}

inline std::vector<ExtractedRow> rows_from_validated(const json& validated) {
    std::vector<ExtractedRow> rows;
    for (const auto& row : validated) {
        ExtractedRow r;
        for (const auto& [name, c] : row.items()) {
            ExtractedCell cell;
            cell.value = c["value"];
            if (c["confidence"].is_number()) cell.confidence = c["confidence"].get<double>();
            for (const auto& id : c["evidence"]) cell.cited.push_back(id.get<std::string>());
            if (c["unit"].is_string()) cell.unit = c["unit"].get<std::string>();
            if (c["failure"].is_string()) cell.failure = c["failure"].get<std::string>();
            r[name] = std::move(cell);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

inline const char* extraction_system_prompt() {
    return "You extract structured records from scientific evidence. Use only the evidence given. "
           "Reply with JSON {\"rows\": [...]}: one row per distinct experimental condition, each "
           "mapping schema field names to {\"value\": ..., \"confidence\": number in [0,1], "
           "\"evidence\": [entry_id, ...]}. Cite the bracketed entry_ids the value was read from. "
           "Use null when the evidence does not state a value. Return {\"rows\": []} when nothing "
           "relevant is present.";
}

/// Context for one extraction call.
struct ExtractionRequest {
    const Document* document = nullptr;
    int round = 1;
    std::vector<std::string> pending;
    const ExtractionRecord* anchor = nullptr;
};

struct ExtractResult {
    std::vector<ExtractionRecord> records;  // record_id left empty
    std::optional<std::string> diagnostic;
    int repair_count = 0;
    std::string fingerprint;
};

inline PromptRequest build_extraction_prompt(const std::vector<QueryResult>& evidence, const VectorStore& store,
                                             const Schema& schema, const ExtractionRequest& ctx,
                                             const RevConfig& config) {
    PromptRequest req;
    req.model_profile = config.profile;
    req.system = std::string(extraction_system_prompt()) + "\nSchema: " + to_json(schema).dump();
    std::string user;
    user += "Document: " + (ctx.document ? ctx.document->doc_id : evidence.front().doc_id) + "\n";
    user += "Round: " + std::to_string(ctx.round) + "\n";
    user += "Pending fields: " + text::join(ctx.pending, ", ") + "\n";
    if (ctx.anchor) {
        std::vector<std::string> known;
        for (const auto& f : schema.fields)
            if (!ctx.anchor->is_null(f.name))
                known.push_back(f.name + "=" + value_to_string(ctx.anchor->values.at(f.name)));
        user += "Known row: " + text::join(known, "; ") + "\n";
    }
    user += "Evidence:\n";
    std::set<std::int64_t> pages_attached;
    for (const auto& hit : evidence) {
        const StoreEntry* e = store.find(hit.entry_id);
        require(e != nullptr, "evidence entry missing from store: " + hit.entry_id);
        user += "[" + e->entry_id + "] (" + std::string(to_string(e->modality)) + ") " + e->text_surrogate + "\n";
        if (e->modality != Modality::Figure || !ctx.document) continue;
        for (const auto& fig : ctx.document->figures) {
            if (fig.figure_id != ref_string(e->ref)) continue;
            if (fig.structured)
                req.attachments.push_back({AttachmentKind::FigureJson, figure_json_to_json(*fig.structured).dump()});
            for (const auto& page : ctx.document->page_images)
                if (page.page_number == fig.page_number && pages_attached.insert(page.page_number).second)
                    req.attachments.push_back({AttachmentKind::ImageUri, page.uri});
        }
    }
    req.user = std::move(user);
    return req;
}

/// Single structured call over the evidence. Uncited values are attributed to
/// the whole evidence set with a 0.1 confidence penalty.
inline ExtractResult extract(const std::vector<QueryResult>& evidence, const VectorStore& store, const Schema& schema,
                             Gateway& gateway, const RevConfig& config, const ExtractionRequest& ctx,
                             const UnitTable& units = default_unit_table()) {
    require(!evidence.empty(), "extract: evidence must be non-empty");
    auto req = build_extraction_prompt(evidence, store, schema, ctx, config);
    ExtractResult result;
    result.fingerprint = fingerprint(req);
    StructuredResult structured;
    try {
        structured = gateway.complete_structured(req, rows_target(schema, units), config.max_repairs);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::StructureInvalidAfterRepair) throw;
        result.diagnostic = e.what();
        result.repair_count = config.max_repairs;
        return result;
    }
    result.repair_count = structured.repair_count;

    std::map<std::string, const QueryResult*> by_id;
    for (const auto& hit : evidence) by_id[hit.entry_id] = &hit;
    auto citation = [&](const std::string& id) {
        const StoreEntry* e = store.find(id);
        return EvidenceCitation{e->modality, e->ref, e->entry_id};
    };
    const std::string doc_id = ctx.document ? ctx.document->doc_id : evidence.front().doc_id;

    for (const auto& row : rows_from_validated(structured.value)) {
        ExtractionRecord rec;
        rec.doc_id = doc_id;
        for (const auto& f : schema.fields) {
            auto it = row.find(f.name);
            if (it == row.end() || it->second.value.is_null()) {
                bool failed = it != row.end() && it->second.failure;
                rec.set_null(f.name, failed ? NullReason::CoercionFailed : NullReason::AbsentInEvidence);
                continue;
            }
            const auto& cell = it->second;
            double conf = cell.confidence.value_or(1.0);
            Provenance prov{doc_id, {}, ctx.round};
            for (const auto& id : cell.cited)
                if (by_id.count(id) && std::none_of(prov.evidence.begin(), prov.evidence.end(),
                                                    [&](const auto& c) { return c.entry_id == id; }))
                    prov.evidence.push_back(citation(id));
            if (prov.evidence.empty()) {
                for (const auto& hit : evidence) prov.evidence.push_back(citation(hit.entry_id));
                conf -= 0.1;
            }
            rec.values[f.name] = cell.value;
            rec.confidence[f.name] = std::clamp(conf, 0.0, 1.0);
            rec.provenance[f.name] = std::move(prov);
            if (cell.unit) rec.units[f.name] = *cell.unit;
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Verification

struct VerificationReport {
    bool complete = true;
    std::map<std::string, std::vector<std::string>> pending_fields_per_record;
    std::map<std::string, std::vector<std::string>> low_confidence_fields;
};

inline json to_json(const VerificationReport& r) {
    return {{"complete", r.complete},
            {"pending_fields_per_record", r.pending_fields_per_record},
            {"low_confidence_fields", r.low_confidence_fields}};
}

/// Range and unit-compatibility checks; a failure zeroes the field's confidence.
inline bool passes_deterministic_checks(const FieldSpec& f, const json& value,
                                        const std::optional<std::string>& unit, const UnitTable& units) {
    if (!f.dtype.is_numeric()) return true;
    std::optional<UnitRule> to_canonical;
    if (f.unit && unit) {
        to_canonical = units.conversion(*unit, *f.unit);
        if (!to_canonical) return false;
    }
    if (!f.range) return true;
    auto in_range = [&](const json& v) {
        if (!v.is_number()) return false;
        double x = v.get<double>();
        if (to_canonical) x = to_canonical->apply(x);
        return f.range->contains(x);
    };
    if (value.is_array()) return std::all_of(value.begin(), value.end(), in_range);
    return in_range(value);
}

/// Complete iff no record has a null required field and every non-null
/// field is at or above the confidence threshold.
inline VerificationReport verify(std::vector<ExtractionRecord>& records, const Schema& schema, const RevConfig& config,
                                 const UnitTable& units = default_unit_table()) {
    VerificationReport report;
    for (auto& rec : records) {
        std::vector<std::string> pending;
        std::vector<std::string> low;
        for (const auto& f : schema.fields) {
            if (rec.is_null(f.name)) {
                if (f.required) pending.push_back(f.name);
                continue;
            }
            auto unit_it = rec.units.find(f.name);
            std::optional<std::string> unit;
            if (unit_it != rec.units.end()) unit = unit_it->second;
            if (!passes_deterministic_checks(f, rec.values.at(f.name), unit, units)) rec.confidence[f.name] = 0.0;
            if (rec.confidence[f.name] < config.confidence_threshold) {
                low.push_back(f.name);
                pending.push_back(f.name);
            }
        }
        if (!pending.empty()) {
            report.complete = false;
            report.pending_fields_per_record[rec.record_id] = pending;
        }
        if (!low.empty()) report.low_confidence_fields[rec.record_id] = low;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Loop

struct RoundAudit {
    int round = 1;
    std::map<std::string, std::vector<std::string>> pending;  // record_id -> fields queried ("*" in round 1)
    std::vector<std::string> queries;
    std::vector<std::string> retrieved;  // sorted, unique
    std::vector<std::string> gateway_fingerprints;
    int records_after = 0;
    std::vector<std::string> diagnostics;
    bool complete = false;
};

inline json to_json(const RoundAudit& a) {
    return {{"round", a.round},
            {"pending", a.pending},
            {"queries", a.queries},
            {"retrieved", a.retrieved},
            {"gateway_fingerprints", a.gateway_fingerprints},
            {"records_after", a.records_after},
            {"diagnostics", a.diagnostics},
            {"complete", a.complete}};
}

struct RevRun {
    std::vector<ExtractionRecord> records;
    std::vector<RoundAudit> audit;
};

namespace detail {

inline bool same_key_value(const FieldSpec& f, const json& a, const std::optional<std::string>& ua, const json& b,
                           const std::optional<std::string>& ub, const UnitTable& units) {
    if (a.is_number() && b.is_number()) {
        double x = a.get<double>();
        double y = b.get<double>();
        auto target = f.unit ? f.unit : ua;
        if (target) {
            if (ua) if (auto r = units.conversion(*ua, *target)) x = r->apply(x);
            if (ub) if (auto r = units.conversion(*ub, *target)) y = r->apply(y);
        }
        return text::round_to(x, 6) == text::round_to(y, 6);
    }
    if (a.is_string() && b.is_string()) return text::casefold_trim(a.get<std::string>()) == text::casefold_trim(b.get<std::string>());
    return a == b;
}

inline std::optional<std::string> unit_of(const ExtractionRecord& r, const std::string& field) {
    auto it = r.units.find(field);
    if (it == r.units.end()) return std::nullopt;
    return it->second;
}

/// Key fields known on both sides agree.
inline bool compatible(const Schema& schema, const ExtractionRecord& a, const ExtractionRecord& b,
                       const UnitTable& units) {
    for (const auto& f : schema.fields) {
        if (!f.is_key || a.is_null(f.name) || b.is_null(f.name)) continue;
        if (!same_key_value(f, a.values.at(f.name), unit_of(a, f.name), b.values.at(f.name), unit_of(b, f.name), units))
            return false;
    }
    return true;
}

inline void fill_pending(ExtractionRecord& target, const ExtractionRecord& candidate,
                         const std::vector<std::string>& pending) {
    for (const auto& field : pending) {
        if (candidate.is_null(field)) {
            if (target.is_null(field) && candidate.null_reasons.count(field) &&
                candidate.null_reasons.at(field) == NullReason::CoercionFailed)
                target.null_reasons[field] = NullReason::CoercionFailed;
            continue;
        }
        double cand_conf = candidate.confidence.count(field) ? candidate.confidence.at(field) : 0.0;
        double cur_conf = target.confidence.count(field) ? target.confidence.at(field) : 0.0;
        if (!target.is_null(field) && cand_conf <= cur_conf) continue;
        target.values[field] = candidate.values.at(field);
        target.confidence[field] = cand_conf;
        target.provenance[field] = candidate.provenance.at(field);
        target.null_reasons.erase(field);
        if (candidate.units.count(field)) target.units[field] = candidate.units.at(field);
        else target.units.erase(field);
    }
}

inline std::vector<std::string> sorted_ids(const std::vector<QueryResult>& hits) {
    std::vector<std::string> ids;
    for (const auto& h : hits) ids.push_back(h.entry_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

}  // namespace detail

/// Runs the loop for one indexed document. Gateway hard failures propagate
/// with the round number in the error path.
inline RevRun run(const Document& document, const Schema& schema, const VectorStore& store, const Embedder& embedder,
                  Gateway& gateway, const RevConfig& config, const UnitTable& units = default_unit_table()) {
    validate(config);
    RevRun out;
    auto& records = out.records;
    int next_id = 1;
    auto assign_id = [&](ExtractionRecord& r) { r.record_id = document.doc_id + "/r" + std::to_string(next_id++); };
    std::map<std::string, std::vector<std::string>> pending_map;

    for (int round = 1; round <= config.max_rounds; ++round) {
        RoundAudit audit;
        audit.round = round;
        std::set<std::string> retrieved;
        auto guarded = [&](auto&& fn) {
            try {
                return fn();
            } catch (const Error& e) {
                throw Error(e.code(), document.doc_id + " round " + std::to_string(round), e.what());
            }
        };

        if (round == 1) {
            auto all = schema.field_names();
            audit.pending["*"] = all;
            audit.queries = formulate_queries(schema, all);
            auto hits = guarded([&] { return retrieve(audit.queries, store, embedder, document.doc_id, config.k); });
            for (const auto& id : detail::sorted_ids(hits)) retrieved.insert(id);
            if (!hits.empty()) {
                ExtractionRequest ctx{&document, round, all, nullptr};
                auto res = guarded([&] { return extract(hits, store, schema, gateway, config, ctx, units); });
                audit.gateway_fingerprints.push_back(res.fingerprint);
                if (res.diagnostic) audit.diagnostics.push_back(*res.diagnostic);
                for (auto& r : res.records) {
                    assign_id(r);
                    records.push_back(std::move(r));
                }
            }
        } else {
            const std::size_t existing = records.size();
            for (std::size_t i = 0; i < existing; ++i) {
                auto it = pending_map.find(records[i].record_id);
                if (it == pending_map.end()) continue;
                const auto pending = it->second;
                audit.pending[records[i].record_id] = pending;
                auto queries = formulate_queries(schema, pending, &records[i]);
                audit.queries.insert(audit.queries.end(), queries.begin(), queries.end());
                auto hits = guarded([&] { return retrieve(queries, store, embedder, document.doc_id, config.k); });
                for (const auto& id : detail::sorted_ids(hits)) retrieved.insert(id);
                if (hits.empty()) continue;
                ExtractionRequest ctx{&document, round, pending, &records[i]};
                auto res = guarded([&] { return extract(hits, store, schema, gateway, config, ctx, units); });
                audit.gateway_fingerprints.push_back(res.fingerprint);
                if (res.diagnostic) audit.diagnostics.push_back(*res.diagnostic);
                for (auto& cand : res.records) {
                    ExtractionRecord* target = nullptr;
                    if (detail::compatible(schema, records[i], cand, units)) target = &records[i];
                    for (std::size_t j = 0; !target && j < records.size(); ++j)
                        if (detail::compatible(schema, records[j], cand, units)) target = &records[j];
                    if (target) {
                        auto pit = pending_map.find(target->record_id);
                        if (pit != pending_map.end()) detail::fill_pending(*target, cand, pit->second);
                    } else {
                        assign_id(cand);
                        records.push_back(std::move(cand));
                    }
                }
            }
        }

        auto report = verify(records, schema, config, units);
        pending_map = report.pending_fields_per_record;
        audit.retrieved.assign(retrieved.begin(), retrieved.end());
        audit.records_after = static_cast<int>(records.size());
        audit.complete = report.complete;
        out.audit.push_back(std::move(audit));
        if (report.complete) break;
    }
    return out;
}

}  // namespace schemaflow
