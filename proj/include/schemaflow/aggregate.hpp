#pragma once

// Reduce step: canonicalize names and categorical terms, normalize units,
// group records by key tuple, vote per field, and check table integrity.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "schemaflow/gateway.hpp"
#include "schemaflow/records.hpp"
#include "schemaflow/rev.hpp"
#include "schemaflow/schema.hpp"
#include "schemaflow/units.hpp"

namespace schemaflow {

enum class CanonSource { StaticTable, LlmProposed };

/// Variant → canonical term. Lookups ignore case and surrounding whitespace.
/// Every canonical term is a fixed point, which also rules out cycles.
class CanonMap {
public:
    struct Entry {
        std::string canonical;
        CanonSource source = CanonSource::StaticTable;
    };

    /// Returns false (and leaves the map unchanged) if the mapping would break
    /// the fixed-point property.
    bool add(const std::string& variant, const std::string& canonical, CanonSource source = CanonSource::StaticTable) {
        auto key = text::casefold_trim(variant);
        auto canon_key = text::casefold_trim(canonical);
        if (key.empty() || canon_key.empty()) return false;
        if (key == canon_key) {
            // identity entry: allowed only if nothing maps this term elsewhere
            auto it = entries_.find(key);
            if (it != entries_.end() && it->second.canonical != canonical) return false;
            entries_[key] = {canonical, source};
            return true;
        }
        // canonical must not itself be a variant of something else
        if (auto it = entries_.find(canon_key); it != entries_.end() && it->second.canonical != canonical) return false;
        // variant must not already serve as someone's canonical term
        for (const auto& [k, e] : entries_)
            if (text::casefold_trim(e.canonical) == key) return false;
        if (auto it = entries_.find(key); it != entries_.end() && it->second.canonical != canonical) return false;
        entries_[key] = {canonical, source};
        return true;
    }

    std::optional<std::string> lookup(std::string_view term) const {
        auto it = entries_.find(text::casefold_trim(term));
        if (it == entries_.end()) return std::nullopt;
        return it->second.canonical;
    }

    std::string canon(std::string_view term) const {
        auto hit = lookup(term);
        return hit ? *hit : std::string(term);
    }

    const std::map<std::string, Entry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    /// {"entries": {variant: canonical}} or a bare {variant: canonical} object.
    static CanonMap from_json(const json& raw) {
        const json& entries = raw.is_object() && raw.contains("entries") ? raw["entries"] : raw;
        if (!entries.is_object()) throw Error(ErrorCode::ConfigError, "canon_map", "expected an object");
        auto source = raw.is_object() && raw.value("source", std::string("static_table")) == "llm_proposed"
                          ? CanonSource::LlmProposed
                          : CanonSource::StaticTable;
        CanonMap m;
        for (const auto& [variant, canon] : entries.items()) {
            if (!canon.is_string()) throw Error(ErrorCode::ConfigError, "canon_map." + variant, "expected string");
            if (!m.add(variant, canon.get<std::string>(), source))
                throw Error(ErrorCode::ConfigError, "canon_map." + variant, "mapping breaks the fixed-point rule");
        }
        return m;
    }

    json to_json() const {
        json entries = json::object();
        json sources = json::object();
        for (const auto& [k, e] : entries_) {
            entries[k] = e.canonical;
            sources[k] = e.source == CanonSource::LlmProposed ? "llm_proposed" : "static_table";
        }
        return {{"entries", entries}, {"sources", sources}};
    }

private:
    std::map<std::string, Entry> entries_;
};

enum class Resolution { Majority, DeterministicReject, UnresolvedNull };

constexpr std::string_view to_string(Resolution r) {
    switch (r) {
        case Resolution::Majority: return "majority";
        case Resolution::DeterministicReject: return "deterministic_reject";
        case Resolution::UnresolvedNull: return "unresolved_null";
    }
    return "majority";
}

struct SourceKey {
    std::string doc_id;
    std::string record_id;

    auto operator<=>(const SourceKey&) const = default;
};

struct ConflictCandidate {
    json value;
    int vote_count = 0;
    std::vector<SourceKey> sources;
    bool rejected = false;
};

struct ConflictReport {
    json group_key = json::array();
    std::string field;
    std::vector<ConflictCandidate> candidates;
    Resolution resolution = Resolution::Majority;
    std::string detail;
};

struct SupportEntry {
    std::string doc_id;
    std::string record_id;
    json value;

    bool operator==(const SupportEntry&) const = default;
};

struct AggregatedRecord {
    json group_key = json::array();
    std::map<std::string, json> values;
    std::map<std::string, std::vector<SupportEntry>> support;
    std::vector<ConflictReport> conflicts;
};

struct RejectedRecord {
    std::string doc_id;
    std::string record_id;
    std::string reason;
};

struct AggregateConfig {
    int precision = 2;
    CanonMap canon_map;
    UnitTable units = UnitTable::builtin();
    Gateway* gateway = nullptr;  // LLM canonicalization proposals, opt-in
    std::string canonicalization_profile = "canonicalizer";
};

struct AggregateResult {
    std::vector<AggregatedRecord> table;
    std::vector<ConflictReport> conflicts;
    std::vector<RejectedRecord> rejected;
    std::vector<std::string> diagnostics;
    std::vector<std::string> violations;
    CanonMap canon_map;  // including accepted proposals
};

// ---------------------------------------------------------------------------
// JSON

inline json to_json(const ConflictReport& c) {
    json cands = json::array();
    for (const auto& cand : c.candidates) {
        json sources = json::array();
        for (const auto& s : cand.sources) sources.push_back({{"doc_id", s.doc_id}, {"record_id", s.record_id}});
        cands.push_back({{"value", cand.value}, {"vote_count", cand.vote_count}, {"sources", sources},
                         {"rejected", cand.rejected}});
    }
    json out = {{"group_key", c.group_key}, {"field", c.field}, {"candidates", cands},
                {"resolution", to_string(c.resolution)}};
    if (!c.detail.empty()) out["detail"] = c.detail;
    return out;
}

inline json to_json(const AggregatedRecord& r) {
    json support = json::object();
    for (const auto& [field, list] : r.support) {
        json items = json::array();
        for (const auto& s : list) items.push_back({{"doc_id", s.doc_id}, {"record_id", s.record_id}, {"value", s.value}});
        support[field] = items;
    }
    json conflicts = json::array();
    for (const auto& c : r.conflicts) {
        auto j = to_json(c);
        j.erase("group_key");
        conflicts.push_back(j);
    }
    return {{"group_key", r.group_key}, {"values", r.values}, {"support", support}, {"conflicts", conflicts}};
}

inline json table_to_json(const std::vector<AggregatedRecord>& table) {
    json out = json::array();
    for (const auto& r : table) out.push_back(to_json(r));
    return out;
}

inline std::optional<Resolution> parse_resolution(std::string_view s) {
    if (s == "majority") return Resolution::Majority;
    if (s == "deterministic_reject") return Resolution::DeterministicReject;
    if (s == "unresolved_null") return Resolution::UnresolvedNull;
    return std::nullopt;
}

inline ConflictReport conflict_from_json(const json& raw, const std::string& path) {
    detail::require_object(raw, path);
    ConflictReport c;
    c.group_key = raw.value("group_key", json::array());
    c.field = detail::get_string(raw, "field", path);
    auto res = parse_resolution(detail::get_string(raw, "resolution", path));
    if (!res) throw Error(ErrorCode::InvalidValue, path + ".resolution");
    c.resolution = *res;
    c.detail = raw.value("detail", std::string());
    for (const auto& cand : detail::get_array(raw, "candidates", path, false)) {
        ConflictCandidate cc;
        cc.value = cand.value("value", json());
        cc.vote_count = cand.value("vote_count", 0);
        cc.rejected = cand.value("rejected", false);
        for (const auto& s : cand.value("sources", json::array()))
            cc.sources.push_back({detail::get_string(s, "doc_id", path), detail::get_string(s, "record_id", path)});
        c.candidates.push_back(std::move(cc));
    }
    return c;
}

inline std::vector<AggregatedRecord> table_from_json(const json& raw) {
    if (!raw.is_array()) throw Error(ErrorCode::InvalidValue, "table", "expected an array of rows");
    std::vector<AggregatedRecord> out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        auto path = detail::index_path("table", i);
        const auto& row = raw[i];
        detail::require_object(row, path);
        AggregatedRecord r;
        r.group_key = row.value("group_key", json::array());
        const json* values = detail::find(row, "values");
        if (!values || !values->is_object()) throw Error(ErrorCode::MissingField, path + ".values");
        for (const auto& [k, v] : values->items()) r.values[k] = v;
        if (const json* support = detail::find(row, "support")) {
            for (const auto& [field, list] : support->items()) {
                for (const auto& s : list)
                    r.support[field].push_back({detail::get_string(s, "doc_id", path + ".support." + field),
                                                detail::get_string(s, "record_id", path + ".support." + field),
                                                s.value("value", json())});
            }
        }
        const json* conflicts = detail::find(row, "conflicts");
        for (std::size_t j = 0; conflicts && conflicts->is_array() && j < conflicts->size(); ++j) {
            auto c = conflict_from_json((*conflicts)[j], detail::index_path(path + ".conflicts", j));
            c.group_key = r.group_key;
            r.conflicts.push_back(std::move(c));
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline std::string conflict_log_jsonl(const AggregateResult& result) {
    std::vector<std::string> lines;
    for (const auto& c : result.conflicts) {
        auto j = to_json(c);
        j["kind"] = "conflict";
        lines.push_back(j.dump());
    }
    for (const auto& r : result.rejected)
        lines.push_back(json{{"kind", "rejected_record"}, {"doc_id", r.doc_id}, {"record_id", r.record_id},
                             {"reason", r.reason}}.dump());
    for (const auto& d : result.diagnostics) lines.push_back(json{{"kind", "diagnostic"}, {"message", d}}.dump());
    for (const auto& v : result.violations) lines.push_back(json{{"kind", "violation"}, {"message", v}}.dump());
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Unit normalization

/// Expresses every numeric field in the schema's unit. Values without a
/// conversion path become null (unresolved_conflict) and are logged.
inline ExtractionRecord normalize_units(ExtractionRecord record, const Schema& schema, const UnitTable& units,
                                        std::vector<ConflictReport>* log = nullptr) {
    for (const auto& f : schema.fields) {
        if (!f.dtype.is_numeric() || !f.unit || record.is_null(f.name)) continue;
        auto uit = record.units.find(f.name);
        if (uit == record.units.end()) {
            record.units[f.name] = *f.unit;  // unit-less numbers are taken as canonical
            continue;
        }
        auto rule = units.conversion(uit->second, *f.unit);
        if (!rule) {
            if (log) {
                ConflictReport c;
                c.field = f.name;
                c.candidates.push_back({record.values[f.name], 1, {{record.doc_id, record.record_id}}, true});
                c.resolution = Resolution::DeterministicReject;
                c.detail = "no conversion path from " + uit->second + " to " + *f.unit;
                log->push_back(std::move(c));
            }
            record.set_null(f.name, NullReason::UnresolvedConflict);
            continue;
        }
        auto convert = [&](const json& v) -> json {
            if (!v.is_number()) return v;
            double x = rule->apply(v.get<double>());
            if (f.dtype.base == BaseType::Integer) return static_cast<std::int64_t>(std::llround(x));
            return x;
        };
        auto& v = record.values[f.name];
        if (rule->scale != 1.0 || rule->offset != 0.0) {
            if (v.is_array())
                for (auto& item : v) item = convert(item);
            else
                v = convert(v);
        }
        uit->second = *f.unit;
    }
    return record;
}

// ---------------------------------------------------------------------------
// Canonicalization

namespace detail {

inline std::optional<std::string> vocabulary_match(const FieldSpec& f, std::string_view term) {
    auto folded = text::casefold_trim(term);
    for (const auto& v : f.vocabulary)
        if (text::casefold_trim(v) == folded) return v;
    return std::nullopt;
}

struct Unseen {
    std::set<std::string> field_names;
    std::map<std::string, std::set<std::string>> categorical;  // field -> variants
};

inline Unseen collect_unseen(const std::vector<ExtractionRecord>& records, const Schema& schema, const CanonMap& map) {
    Unseen u;
    for (const auto& r : records) {
        for (const auto& [name, v] : r.values) {
            if (schema.find(name) || schema.find(map.canon(name))) continue;
            u.field_names.insert(name);
        }
        for (const auto& f : schema.fields) {
            if (f.dtype.base != BaseType::Categorical) continue;
            auto it = r.values.find(f.name);
            if (it == r.values.end()) continue;
            auto check = [&](const json& v) {
                if (!v.is_string()) return;
                auto term = v.get<std::string>();
                if (!vocabulary_match(f, term) && !vocabulary_match(f, map.canon(term))) u.categorical[f.name].insert(term);
            };
            if (it->second.is_array())
                for (const auto& item : it->second) check(item);
            else
                check(it->second);
        }
    }
    return u;
}

inline void propose_mappings(const Unseen& unseen, const Schema& schema, CanonMap& map, Gateway& gateway,
                             const std::string& profile) {
    if (unseen.field_names.empty() && unseen.categorical.empty()) return;
    std::string user = "Map each variant to one canonical term. Reply {\"mappings\": {variant: canonical}}; "
                       "omit variants with no suitable canonical term.\n";
    if (!unseen.field_names.empty()) {
        user += "Field-name variants: " + json(unseen.field_names).dump() + "\n";
        user += "Canonical field names: " + json(schema.field_names()).dump() + "\n";
    }
    for (const auto& [field, variants] : unseen.categorical) {
        user += "Values of " + field + ": " + json(variants).dump() + "\n";
        user += "Vocabulary of " + field + ": " + json(schema.find(field)->vocabulary).dump() + "\n";
    }
    PromptRequest req;
    req.model_profile = profile;
    req.system = "You canonicalize lexical and morphological variants of scientific terms.";
    req.user = user;
    auto res = gateway.complete_structured(
        req, shape_target({{"type", "object"},
                           {"required", {"mappings"}},
                           {"properties", {{"mappings", {{"type", "object"}}}}}}));
    for (const auto& [variant, canon] : res.value["mappings"].items()) {
        if (!canon.is_string()) continue;
        auto target = canon.get<std::string>();
        bool valid_field = unseen.field_names.count(variant) && schema.find(target);
        bool valid_term = false;
        for (const auto& [field, variants] : unseen.categorical)
            if (variants.count(variant) && vocabulary_match(*schema.find(field), target)) valid_term = true;
        if (valid_field || valid_term) map.add(variant, target, CanonSource::LlmProposed);
    }
}

}  // namespace detail

/// Rewrites field names, categorical values, and string values to canonical
/// forms. Unknown field names are dropped with a diagnostic; categorical
/// values outside the vocabulary become null (coercion_failed).
inline std::vector<ExtractionRecord> canonicalize(std::vector<ExtractionRecord> records, const Schema& schema,
                                                  CanonMap& map, Gateway* gateway = nullptr,
                                                  const std::string& profile = "canonicalizer",
                                                  std::vector<std::string>* diagnostics = nullptr) {
    if (gateway) detail::propose_mappings(detail::collect_unseen(records, schema, map), schema, map, *gateway, profile);

    for (auto& r : records) {
        std::map<std::string, json> renamed;
        for (auto& [name, v] : r.values) {
            std::string target = schema.find(name) ? name : map.canon(name);
            if (!schema.find(target)) {
                if (diagnostics) diagnostics->push_back(r.record_id + ": dropped unknown field '" + name + "'");
                continue;
            }
            if (target != name) {
                auto move_meta = [&](auto& m) {
                    auto it = m.find(name);
                    if (it == m.end()) return;
                    if (!m.count(target) || renamed.count(target) == 0) m[target] = it->second;
                    m.erase(name);
                };
                bool target_has_value = r.values.count(target) && !r.values.at(target).is_null();
                if (target_has_value && !v.is_null()) {
                    if (diagnostics)
                        diagnostics->push_back(r.record_id + ": '" + name + "' duplicates '" + target + "'; kept '" + target + "'");
                    continue;
                }
                if (v.is_null() && renamed.count(target)) continue;
                move_meta(r.confidence);
                move_meta(r.provenance);
                move_meta(r.null_reasons);
                move_meta(r.units);
            }
            if (!renamed.count(target) || renamed[target].is_null()) renamed[target] = v;
        }
        for (const auto& f : schema.fields)
            if (!renamed.count(f.name)) renamed[f.name] = nullptr;
        // metadata for dropped names goes with them
        for (auto* m : {&r.units}) {
            for (auto it = m->begin(); it != m->end();)
                it = schema.find(it->first) ? std::next(it) : m->erase(it);
        }
        for (auto it = r.confidence.begin(); it != r.confidence.end();)
            it = schema.find(it->first) ? std::next(it) : r.confidence.erase(it);
        for (auto it = r.provenance.begin(); it != r.provenance.end();)
            it = schema.find(it->first) ? std::next(it) : r.provenance.erase(it);
        for (auto it = r.null_reasons.begin(); it != r.null_reasons.end();)
            it = schema.find(it->first) ? std::next(it) : r.null_reasons.erase(it);
        r.values = std::move(renamed);

        for (const auto& f : schema.fields) {
            auto& v = r.values[f.name];
            if (v.is_null()) continue;
            bool failed = false;
            auto fix = [&](json& item) {
                if (!item.is_string()) return;
                auto term = item.get<std::string>();
                if (f.dtype.base == BaseType::Categorical) {
                    auto hit = detail::vocabulary_match(f, term);
                    if (!hit) hit = detail::vocabulary_match(f, map.canon(term));
                    if (hit) item = *hit;
                    else failed = true;
                } else if (f.dtype.base == BaseType::String) {
                    item = map.canon(term);
                }
            };
            if (v.is_array())
                for (auto& item : v) fix(item);
            else
                fix(v);
            if (failed) r.set_null(f.name, NullReason::CoercionFailed);
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// Grouping and voting

namespace detail {

inline json key_component(const json& v, int precision) {
    if (v.is_number_float()) return text::round_to(v.get<double>(), precision);
    return v;
}

/// Vote identity: numbers compare at the grouping precision.
inline std::string vote_key(const json& v, int precision) {
    if (v.is_number()) return json(text::round_to(v.get<double>(), precision)).dump();
    return v.dump();
}

}  // namespace detail

struct RecordGroup {
    json key = json::array();
    std::vector<ExtractionRecord> members;
};

/// Partitions by key tuple (numbers rounded to `precision`), sorted by key.
/// Records with a null key field are returned in `rejected`.
inline std::vector<RecordGroup> group(const std::vector<ExtractionRecord>& records,
                                      const std::vector<std::string>& key_fields, int precision = 2,
                                      std::vector<RejectedRecord>* rejected = nullptr) {
    std::map<json, RecordGroup, json_less> groups;
    for (const auto& r : records) {
        json key = json::array();
        std::string missing;
        for (const auto& k : key_fields) {
            if (r.is_null(k)) {
                missing = k;
                break;
            }
            key.push_back(detail::key_component(r.values.at(k), precision));
        }
        if (!missing.empty()) {
            if (rejected) rejected->push_back({r.doc_id, r.record_id, "null key field " + missing});
            continue;
        }
        auto& g = groups[key];
        g.key = key;
        g.members.push_back(r);
    }
    std::vector<RecordGroup> out;
    for (auto& [k, g] : groups) {
        std::sort(g.members.begin(), g.members.end(), [](const auto& a, const auto& b) {
            return std::tie(a.doc_id, a.record_id) < std::tie(b.doc_id, b.record_id);
        });
        out.push_back(std::move(g));
    }
    return out;
}

/// Range, vocabulary, and unit checks applied before voting.
inline bool value_passes_checks(const FieldSpec& f, const json& value, const ExtractionRecord& r, const UnitTable& units) {
    if (f.dtype.base == BaseType::Categorical) {
        auto ok = [&](const json& v) {
            return v.is_string() && std::find(f.vocabulary.begin(), f.vocabulary.end(), v.get<std::string>()) != f.vocabulary.end();
        };
        if (value.is_array()) return std::all_of(value.begin(), value.end(), ok);
        return ok(value);
    }
    std::optional<std::string> unit;
    if (auto it = r.units.find(f.name); it != r.units.end()) unit = it->second;
    if (f.unit && unit && units.canonical_symbol(*unit) != *f.unit) return false;
    return passes_deterministic_checks(f, value, unit, units);
}

/// Per non-key field: deterministic checks filter candidates, then a strict
/// majority of the surviving votes wins. A tie leaves the field null.
inline AggregatedRecord resolve_conflicts(const RecordGroup& g, const Schema& schema, int precision = 2,
                                          const UnitTable& units = default_unit_table()) {
    require(!g.members.empty(), "resolve_conflicts: group must be non-empty");
    AggregatedRecord out;
    out.group_key = g.key;
    auto keys = schema.key_fields();
    for (std::size_t i = 0; i < keys.size(); ++i) {
        out.values[keys[i]] = g.key[i];
        for (const auto& m : g.members) out.support[keys[i]].push_back({m.doc_id, m.record_id, m.values.at(keys[i])});
    }

    for (const auto& f : schema.fields) {
        if (f.is_key) continue;
        struct Bucket {
            json representative;
            std::vector<const ExtractionRecord*> voters;
        };
        std::map<std::string, Bucket> survivors;
        std::map<std::string, Bucket> rejected;
        int n_survivors = 0;
        for (const auto& m : g.members) {
            auto it = m.values.find(f.name);
            if (it == m.values.end() || it->second.is_null()) continue;
            const json& v = it->second;
            bool ok = value_passes_checks(f, v, m, units);
            json canonical_v = v;
            if (f.dtype.is_list && v.is_array()) {
                std::set<std::string> seen;
                json dedup = json::array();
                std::vector<json> items(v.begin(), v.end());
                std::sort(items.begin(), items.end(), json_less{});
                for (const auto& item : items)
                    if (seen.insert(detail::vote_key(item, precision)).second) dedup.push_back(item);
                canonical_v = dedup;
            }
            auto key = f.dtype.is_list ? canonical_v.dump() : detail::vote_key(v, precision);
            auto& bucket = (ok ? survivors : rejected)[key];
            if (bucket.voters.empty() || (v.is_number() && json_less{}(v, bucket.representative))) bucket.representative = canonical_v;
            bucket.voters.push_back(&m);
            if (ok) ++n_survivors;
        }
        if (survivors.empty() && rejected.empty()) {
            out.values[f.name] = nullptr;
            continue;
        }

        auto to_candidate = [](const Bucket& b, bool was_rejected) {
            ConflictCandidate c{b.representative, static_cast<int>(b.voters.size()), {}, was_rejected};
            for (const auto* r : b.voters) c.sources.push_back({r->doc_id, r->record_id});
            std::sort(c.sources.begin(), c.sources.end());
            return c;
        };
        ConflictReport report;
        report.group_key = g.key;
        report.field = f.name;
        for (const auto& [k, b] : survivors) report.candidates.push_back(to_candidate(b, false));
        for (const auto& [k, b] : rejected) report.candidates.push_back(to_candidate(b, true));

        const Bucket* winner = nullptr;
        if (f.dtype.is_list && !survivors.empty()) {
            // list fields merge: union of every surviving value set
            std::set<std::string> seen;
            std::vector<json> items;
            std::vector<const ExtractionRecord*> voters;
            for (const auto& [k, b] : survivors) {
                for (const auto& item : b.representative)
                    if (seen.insert(detail::vote_key(item, precision)).second) items.push_back(item);
                voters.insert(voters.end(), b.voters.begin(), b.voters.end());
            }
            std::sort(items.begin(), items.end(), json_less{});
            out.values[f.name] = json(items);
            for (const auto* r : voters) out.support[f.name].push_back({r->doc_id, r->record_id, r->values.at(f.name)});
            std::sort(out.support[f.name].begin(), out.support[f.name].end(),
                      [](const auto& a, const auto& b) { return std::tie(a.doc_id, a.record_id) < std::tie(b.doc_id, b.record_id); });
            if (!rejected.empty()) {
                report.resolution = Resolution::Majority;
                report.detail = "list values merged; rejected candidates excluded";
                out.conflicts.push_back(std::move(report));
            }
            continue;
        }
        for (const auto& [k, b] : survivors)
            if (2 * static_cast<int>(b.voters.size()) > n_survivors) winner = &b;

        if (winner) {
            out.values[f.name] = winner->representative;
            for (const auto* r : winner->voters) out.support[f.name].push_back({r->doc_id, r->record_id, r->values.at(f.name)});
            if (survivors.size() > 1 || !rejected.empty()) {
                report.resolution = Resolution::Majority;
                out.conflicts.push_back(std::move(report));
            }
        } else {
            out.values[f.name] = nullptr;
            report.resolution = survivors.empty() ? Resolution::DeterministicReject : Resolution::UnresolvedNull;
            out.conflicts.push_back(std::move(report));
        }
    }
    return out;
}

/// Traceability, list de-duplication, and duplicate-key collapse. Repairs in
/// place; returns the violations that remain.
inline std::vector<std::string> integrity_check(std::vector<AggregatedRecord>& table,
                                                const std::set<SourceKey>& known_sources) {
    std::vector<std::string> violations;
    std::map<json, std::size_t, json_less> seen_keys;
    std::vector<AggregatedRecord> collapsed;
    for (auto& row : table) {
        auto it = seen_keys.find(row.group_key);
        if (it == seen_keys.end()) {
            seen_keys.emplace(row.group_key, collapsed.size());
            collapsed.push_back(std::move(row));
            continue;
        }
        auto& keep = collapsed[it->second];
        for (auto& [field, v] : row.values) {
            auto& kv = keep.values[field];
            if (kv.is_null()) kv = v;
            else if (!v.is_null() && kv != v)
                violations.push_back("group " + row.group_key.dump() + ": contradictory duplicate values for " + field);
        }
        for (auto& [field, list] : row.support)
            for (auto& s : list)
                if (std::find(keep.support[field].begin(), keep.support[field].end(), s) == keep.support[field].end())
                    keep.support[field].push_back(s);
        keep.conflicts.insert(keep.conflicts.end(), row.conflicts.begin(), row.conflicts.end());
    }
    table = std::move(collapsed);

    for (auto& row : table) {
        for (const auto& k : row.group_key)
            if (k.is_null()) violations.push_back("group " + row.group_key.dump() + ": null key component");
        for (auto& [field, v] : row.values) {
            if (v.is_array()) {
                json dedup = json::array();
                for (const auto& item : v)
                    if (std::find(dedup.begin(), dedup.end(), item) == dedup.end()) dedup.push_back(item);
                v = dedup;
            }
            if (v.is_null()) continue;
            auto sit = row.support.find(field);
            if (sit == row.support.end() || sit->second.empty()) {
                violations.push_back("group " + row.group_key.dump() + ": " + field + " has no support");
                continue;
            }
            for (const auto& s : sit->second)
                if (!known_sources.count({s.doc_id, s.record_id}))
                    violations.push_back("group " + row.group_key.dump() + ": " + field + " cites unknown record " +
                                         s.doc_id + "/" + s.record_id);
        }
    }
    return violations;
}

/// canonicalize → normalize_units → group → resolve_conflicts → integrity_check.
inline AggregateResult aggregate(const std::vector<ExtractionRecord>& input, const Schema& schema,
                                 const AggregateConfig& config) {
    AggregateResult result;
    result.canon_map = config.canon_map;
    auto records = canonicalize(input, schema, result.canon_map, config.gateway, config.canonicalization_profile,
                                &result.diagnostics);
    std::vector<ConflictReport> unit_log;
    for (auto& r : records) r = normalize_units(std::move(r), schema, config.units, &unit_log);

    auto groups = group(records, schema.key_fields(), config.precision, &result.rejected);
    std::set<SourceKey> known;
    for (const auto& r : input) known.insert({r.doc_id, r.record_id});
    for (const auto& g : groups) {
        auto row = resolve_conflicts(g, schema, config.precision, config.units);
        result.conflicts.insert(result.conflicts.end(), row.conflicts.begin(), row.conflicts.end());
        result.table.push_back(std::move(row));
    }
    result.conflicts.insert(result.conflicts.end(), unit_log.begin(), unit_log.end());
    result.violations = integrity_check(result.table, known);

    std::sort(result.conflicts.begin(), result.conflicts.end(), [](const auto& a, const auto& b) {
        return to_json(a).dump() < to_json(b).dump();
    });
    std::sort(result.rejected.begin(), result.rejected.end(), [](const auto& a, const auto& b) {
        return std::tie(a.doc_id, a.record_id) < std::tie(b.doc_id, b.record_id);
    });
    std::sort(result.diagnostics.begin(), result.diagnostics.end());
    return result;
}

/// Expands a unified table back into the per-source records it was built
/// from, so the table can be fed through aggregate again.
inline std::vector<ExtractionRecord> table_to_records(const std::vector<AggregatedRecord>& table, const Schema& schema) {
    std::map<SourceKey, ExtractionRecord> by_source;
    for (const auto& row : table) {
        for (const auto& [field, list] : row.support) {
            for (const auto& s : list) {
                auto& r = by_source[{s.doc_id, s.record_id}];
                r.doc_id = s.doc_id;
                r.record_id = s.record_id;
                r.values[field] = s.value;
                const FieldSpec* f = schema.find(field);
                if (f && f->unit && s.value.is_number()) r.units[field] = *f->unit;
                if (f && f->unit && s.value.is_array()) r.units[field] = *f->unit;
            }
        }
    }
    std::vector<ExtractionRecord> out;
    for (auto& [k, r] : by_source) {
        for (const auto& f : schema.fields)
            if (!r.values.count(f.name)) r.set_null(f.name, NullReason::AbsentInEvidence);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace schemaflow
