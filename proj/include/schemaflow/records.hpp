#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "schemaflow/schema.hpp"
#include "schemaflow/store.hpp"

namespace schemaflow {

enum class NullReason { AbsentInEvidence, CoercionFailed, UnresolvedConflict };

constexpr std::string_view to_string(NullReason r) {
    switch (r) {
        case NullReason::AbsentInEvidence: return "absent_in_evidence";
        case NullReason::CoercionFailed: return "coercion_failed";
        case NullReason::UnresolvedConflict: return "unresolved_conflict";
    }
    return "absent_in_evidence";
}

inline std::optional<NullReason> parse_null_reason(std::string_view s) {
    if (s == "absent_in_evidence") return NullReason::AbsentInEvidence;
    if (s == "coercion_failed") return NullReason::CoercionFailed;
    if (s == "unresolved_conflict") return NullReason::UnresolvedConflict;
    return std::nullopt;
}

struct EvidenceCitation {
    Modality modality = Modality::Text;
    SourceRef ref;
    std::string entry_id;

    bool operator==(const EvidenceCitation&) const = default;
};

struct Provenance {
    std::string doc_id;
    std::vector<EvidenceCitation> evidence;
    int round = 1;

    bool operator==(const Provenance&) const = default;
};

/// One extracted row. Every schema field has an entry in `values`; null
/// values carry a reason instead of provenance.
struct ExtractionRecord {
    std::string record_id;
    std::string doc_id;
    std::map<std::string, json> values;
    std::map<std::string, double> confidence;
    std::map<std::string, Provenance> provenance;
    std::map<std::string, NullReason> null_reasons;
    std::map<std::string, std::string> units;  // detected unit per field, canonical symbol

    bool is_null(const std::string& field) const {
        auto it = values.find(field);
        return it == values.end() || it->second.is_null();
    }

    void set_null(const std::string& field, NullReason reason) {
        values[field] = nullptr;
        null_reasons[field] = reason;
        provenance.erase(field);
        units.erase(field);
        confidence[field] = 0.0;
    }

    bool operator==(const ExtractionRecord&) const = default;
};

inline json to_json(const EvidenceCitation& c) {
    return {{"modality", to_string(c.modality)}, {"ref", to_json(c.ref)}, {"entry_id", c.entry_id}};
}

inline json to_json(const ExtractionRecord& r) {
    json prov = json::object();
    for (const auto& [field, p] : r.provenance) {
        json ev = json::array();
        for (const auto& c : p.evidence) ev.push_back(to_json(c));
        prov[field] = {{"doc_id", p.doc_id}, {"round", p.round}, {"evidence", ev}};
    }
    json reasons = json::object();
    for (const auto& [field, reason] : r.null_reasons) reasons[field] = to_string(reason);
    return {{"record_id", r.record_id},
            {"doc_id", r.doc_id},
            {"values", r.values},
            {"confidence", r.confidence},
            {"provenance", prov},
            {"null_reasons", reasons},
            {"units", r.units}};
}

inline ExtractionRecord record_from_json(const json& raw, const std::string& origin = "record") {
    detail::require_object(raw, origin);
    ExtractionRecord r;
    r.record_id = detail::get_string(raw, "record_id", origin);
    r.doc_id = detail::get_string(raw, "doc_id", origin);
    const json* values = detail::find(raw, "values");
    if (!values || !values->is_object()) throw Error(ErrorCode::MissingField, origin + ".values");
    for (const auto& [k, v] : values->items()) r.values[k] = v;
    if (const json* conf = detail::find(raw, "confidence"))
        for (const auto& [k, v] : conf->items())
            if (v.is_number()) r.confidence[k] = v.get<double>();
    if (const json* prov = detail::find(raw, "provenance")) {
        for (const auto& [k, p] : prov->items()) {
            auto path = origin + ".provenance." + k;
            Provenance pv;
            pv.doc_id = detail::get_string(p, "doc_id", path);
            pv.round = static_cast<int>(detail::get_int(p, "round", path));
            for (const auto& c : detail::get_array(p, "evidence", path, false)) {
                EvidenceCitation ec;
                auto m = parse_modality(detail::get_string(c, "modality", path));
                if (!m) throw Error(ErrorCode::InvalidValue, path + ".modality");
                ec.modality = *m;
                const json* ref = detail::find(c, "ref");
                if (ref && ref->is_number_integer()) ec.ref = ref->get<std::int64_t>();
                else if (ref && ref->is_string()) ec.ref = ref->get<std::string>();
                else throw Error(ErrorCode::InvalidValue, path + ".ref");
                ec.entry_id = detail::get_string(c, "entry_id", path);
                pv.evidence.push_back(std::move(ec));
            }
            r.provenance[k] = std::move(pv);
        }
    }
    if (const json* reasons = detail::find(raw, "null_reasons")) {
        for (const auto& [k, v] : reasons->items()) {
            auto reason = v.is_string() ? parse_null_reason(v.get<std::string>()) : std::nullopt;
            if (!reason) throw Error(ErrorCode::InvalidValue, origin + ".null_reasons." + k);
            r.null_reasons[k] = *reason;
        }
    }
    if (const json* units = detail::find(raw, "units"))
        for (const auto& [k, v] : units->items())
            if (v.is_string()) r.units[k] = v.get<std::string>();
    return r;
}

inline std::string records_to_jsonl(const std::vector<ExtractionRecord>& records) {
    std::vector<json> lines;
    for (const auto& r : records) lines.push_back(to_json(r));
    return to_json_lines(lines);
}

inline std::vector<ExtractionRecord> records_from_jsonl(std::string_view text, const std::string& origin = "records") {
    std::vector<ExtractionRecord> out;
    std::size_t i = 0;
    for (const auto& line : parse_json_lines(text, origin))
        out.push_back(record_from_json(line, origin + ":" + std::to_string(++i)));
    return out;
}

}  // namespace schemaflow
