#pragma once

// Typed extraction schemas: parsing, serialization, record validation and
// value coercion.

#include <charconv>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "schemaflow/json_util.hpp"
#include "schemaflow/text.hpp"
#include "schemaflow/units.hpp"

namespace schemaflow {

enum class BaseType { String, Float, Integer, Boolean, Categorical };

struct DType {
    BaseType base = BaseType::String;
    bool is_list = false;

    bool is_numeric() const { return base == BaseType::Float || base == BaseType::Integer; }
    bool operator==(const DType&) const = default;
};

constexpr std::string_view to_string(BaseType t) {
    switch (t) {
        case BaseType::String: return "string";
        case BaseType::Float: return "float";
        case BaseType::Integer: return "integer";
        case BaseType::Boolean: return "boolean";
        case BaseType::Categorical: return "categorical";
    }
    return "string";
}

inline std::string to_string(const DType& t) {
    std::string base(to_string(t.base));
    return t.is_list ? "list_of(" + base + ")" : base;
}

inline std::optional<BaseType> parse_base_type(std::string_view s) {
    if (s == "string") return BaseType::String;
    if (s == "float") return BaseType::Float;
    if (s == "integer") return BaseType::Integer;
    if (s == "boolean") return BaseType::Boolean;
    if (s == "categorical") return BaseType::Categorical;
    return std::nullopt;
}

/// "float", "list_of(categorical)", ... Nested lists are not supported.
inline std::optional<DType> parse_dtype(std::string_view s) {
    constexpr std::string_view prefix = "list_of(";
    if (s.size() > prefix.size() && s.substr(0, prefix.size()) == prefix && s.back() == ')') {
        auto inner = parse_base_type(s.substr(prefix.size(), s.size() - prefix.size() - 1));
        if (!inner) return std::nullopt;
        return DType{*inner, true};
    }
    auto base = parse_base_type(s);
    if (!base) return std::nullopt;
    return DType{*base, false};
}

struct NumericRange {
    double min = 0.0;
    double max = 0.0;

    bool contains(double v) const { return v >= min && v <= max; }
    bool operator==(const NumericRange&) const = default;
};

struct FieldSpec {
    std::string name;
    DType dtype;
    std::optional<std::string> unit;
    std::vector<std::string> vocabulary;
    bool required = false;
    bool is_key = false;
    std::optional<NumericRange> range;
    std::string description;

    bool operator==(const FieldSpec&) const = default;
};

struct Schema {
    std::string schema_id;
    std::string description;
    std::vector<FieldSpec> fields;

    const FieldSpec* find(std::string_view name) const {
        for (const auto& f : fields)
            if (f.name == name) return &f;
        return nullptr;
    }

    std::vector<std::string> field_names() const {
        std::vector<std::string> out;
        for (const auto& f : fields) out.push_back(f.name);
        return out;
    }

    std::vector<std::string> key_fields() const {
        std::vector<std::string> out;
        for (const auto& f : fields)
            if (f.is_key) out.push_back(f.name);
        return out;
    }

    bool operator==(const Schema&) const = default;
};

namespace detail {

inline void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                                const std::string& path) {
    for (const auto& [key, value] : obj.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) throw Error(ErrorCode::UnknownKey, join_path(path, key));
    }
}

inline FieldSpec parse_field(const json& raw, const std::string& path, const UnitTable& units) {
    if (!raw.is_object()) throw Error(ErrorCode::InvalidSchema, path, "field must be an object");
    reject_unknown_keys(raw, {"name", "dtype", "unit", "vocabulary", "required", "is_key", "range",
                              "description"},
                        path);
    FieldSpec f;
    f.name = std::string(text::trim(get_string(raw, "name", path)));
    if (f.name.empty()) throw Error(ErrorCode::MissingField, join_path(path, "name"));
    auto dtype_text = get_string(raw, "dtype", path);
    auto dtype = parse_dtype(dtype_text);
    if (!dtype) throw Error(ErrorCode::UnknownDtype, join_path(path, "dtype"), dtype_text);
    f.dtype = *dtype;
    if (auto unit = get_opt_string(raw, "unit", path); unit && !text::trim(*unit).empty())
        f.unit = units.canonical_symbol(*unit);
    const auto& vocab = get_array(raw, "vocabulary", path, false);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        if (!vocab[i].is_string())
            throw Error(ErrorCode::InvalidSchema, index_path(join_path(path, "vocabulary"), i),
                        "vocabulary entries must be strings");
        auto term = vocab[i].get<std::string>();
        if (!seen.insert(text::casefold_trim(term)).second)
            throw Error(ErrorCode::InvalidSchema, join_path(path, "vocabulary"),
                        "duplicate term '" + term + "'");
        f.vocabulary.push_back(std::move(term));
    }
    if (f.dtype.base == BaseType::Categorical && f.vocabulary.empty())
        throw Error(ErrorCode::MissingVocabulary, join_path(path, "vocabulary"), f.name);
    if (f.dtype.base != BaseType::Categorical && !f.vocabulary.empty())
        throw Error(ErrorCode::InvalidSchema, join_path(path, "vocabulary"),
                    "vocabulary is only valid for categorical fields");
    f.required = get_bool(raw, "required", path, false);
    f.is_key = get_bool(raw, "is_key", path, false);
    if (const json* range = find(raw, "range")) {
        auto rp = join_path(path, "range");
        if (!f.dtype.is_numeric())
            throw Error(ErrorCode::InvalidSchema, rp, "range requires a numeric dtype");
        NumericRange r;
        if (range->is_array() && range->size() == 2 && (*range)[0].is_number() &&
            (*range)[1].is_number()) {
            r = {(*range)[0].get<double>(), (*range)[1].get<double>()};
        } else if (range->is_object()) {
            reject_unknown_keys(*range, {"min", "max"}, rp);
            r = {get_number(*range, "min", rp), get_number(*range, "max", rp)};
        } else {
            throw Error(ErrorCode::InvalidSchema, rp, "expected {min, max}");
        }
        if (!(r.min <= r.max)) throw Error(ErrorCode::InvalidSchema, rp, "min exceeds max");
        f.range = r;
    }
    f.description = get_opt_string(raw, "description", path).value_or("");
    return f;
}

}  // namespace detail

/// Parses an explicit schema. Unknown keys are rejected.
inline Schema parse_schema(const json& raw, const UnitTable& units = default_unit_table()) {
    try {
        if (!raw.is_object()) throw Error(ErrorCode::InvalidSchema, "$", "schema must be an object");
        detail::reject_unknown_keys(raw, {"schema_id", "description", "fields"}, "");
        Schema s;
        s.schema_id = detail::get_opt_string(raw, "schema_id", "").value_or("");
        s.description = detail::get_opt_string(raw, "description", "").value_or("");
        const auto& fields = detail::get_array(raw, "fields", "");
        if (fields.empty()) throw Error(ErrorCode::InvalidSchema, "fields", "at least one field");
        std::set<std::string> names;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            auto f = detail::parse_field(fields[i], detail::index_path("fields", i), units);
            if (!names.insert(f.name).second)
                throw Error(ErrorCode::DuplicateFieldName, detail::index_path("fields", i), f.name);
            s.fields.push_back(std::move(f));
        }
        if (s.key_fields().empty()) throw Error(ErrorCode::NoKeyField, "fields");
        return s;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(ErrorCode::InvalidSchema, "$", e.what());
    }
}

inline json to_json(const FieldSpec& f) {
    json out = {{"name", f.name},
                {"dtype", to_string(f.dtype)},
                {"required", f.required},
                {"is_key", f.is_key}};
    if (f.unit) out["unit"] = *f.unit;
    if (!f.vocabulary.empty()) out["vocabulary"] = f.vocabulary;
    if (f.range) out["range"] = {{"min", f.range->min}, {"max", f.range->max}};
    if (!f.description.empty()) out["description"] = f.description;
    return out;
}

inline json to_json(const Schema& s) {
    json out;
    if (!s.schema_id.empty()) out["schema_id"] = s.schema_id;
    if (!s.description.empty()) out["description"] = s.description;
    out["fields"] = json::array();
    for (const auto& f : s.fields) out["fields"].push_back(to_json(f));
    return out;
}

// ---------------------------------------------------------------------------
// Value coercion

/// Result of coercing one raw value. Failure is data, not an exception: the
/// verifier turns it into a low-confidence field.
struct Coerced {
    json value;                       // typed value, or null on failure
    std::optional<std::string> unit;  // detected unit symbol, canonicalized
    std::optional<std::string> failure;

    bool ok() const { return !failure.has_value(); }
};

namespace detail {

struct NumberPrefix {
    double value;
    std::string_view rest;
};

inline std::optional<NumberPrefix> parse_number_prefix(std::string_view s) {
    s = text::trim(s);
    bool negative = false;
    if (!s.empty() && (s[0] == '+' || s[0] == '-')) {
        negative = s[0] == '-';
        s.remove_prefix(1);
    } else if (s.size() >= 3 && s.substr(0, 3) == "\xE2\x88\x92") {  // U+2212 minus sign
        negative = true;
        s.remove_prefix(3);
    }
    if (s.empty() || !(std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '.')) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || !std::isfinite(v)) return std::nullopt;
    return NumberPrefix{negative ? -v : v, s.substr(static_cast<std::size_t>(ptr - s.data()))};
}

inline Coerced fail(std::string reason) { return Coerced{nullptr, std::nullopt, std::move(reason)}; }

inline Coerced coerce_scalar(const FieldSpec& spec, BaseType base, std::string_view raw,
                             const UnitTable& units) {
    auto trimmed = text::trim(raw);
    if (trimmed.empty()) return fail("empty value");
    switch (base) {
        case BaseType::String:
            return Coerced{std::string(trimmed), std::nullopt, std::nullopt};
        case BaseType::Categorical: {
            auto folded = text::casefold(trimmed);
            for (const auto& term : spec.vocabulary)
                if (text::casefold_trim(term) == folded) return Coerced{term, std::nullopt, std::nullopt};
            return fail("'" + std::string(trimmed) + "' not in vocabulary of " + spec.name);
        }
        case BaseType::Boolean: {
            auto folded = text::casefold(trimmed);
            if (folded == "true" || folded == "yes" || folded == "1") return Coerced{true, {}, {}};
            if (folded == "false" || folded == "no" || folded == "0") return Coerced{false, {}, {}};
            return fail("'" + std::string(trimmed) + "' is not a boolean");
        }
        case BaseType::Float:
        case BaseType::Integer: {
            auto num = parse_number_prefix(trimmed);
            if (!num) return fail("'" + std::string(trimmed) + "' is not numeric");
            std::optional<std::string> unit;
            if (auto rest = text::trim(num->rest); !rest.empty()) unit = units.canonical_symbol(rest);
            if (base == BaseType::Integer) {
                if (num->value != std::floor(num->value) || std::fabs(num->value) > 9e15)
                    return fail("'" + std::string(trimmed) + "' is not integral");
                return Coerced{static_cast<std::int64_t>(num->value), unit, std::nullopt};
            }
            return Coerced{num->value, unit, std::nullopt};
        }
    }
    return fail("unsupported dtype");
}

}  // namespace detail

/// Coerces raw text to the field's dtype. Numbers may carry a trailing unit
/// ("25 °C"); lists are split on ';'.
inline Coerced coerce_value(const FieldSpec& spec, std::string_view raw,
                            const UnitTable& units = default_unit_table()) {
    if (!spec.dtype.is_list) return detail::coerce_scalar(spec, spec.dtype.base, raw, units);
    json items = json::array();
    std::optional<std::string> unit;
    for (const auto& part : text::split(raw, ';')) {
        if (text::trim(part).empty()) continue;
        auto c = detail::coerce_scalar(spec, spec.dtype.base, part, units);
        if (!c.ok()) return c;
        if (c.unit) {
            if (unit && *unit != *c.unit) return detail::fail("mixed units in list");
            unit = c.unit;
        }
        items.push_back(std::move(c.value));
    }
    if (items.empty()) return detail::fail("empty list");
    return Coerced{std::move(items), unit, std::nullopt};
}

/// String form that coerce_value maps back to the same typed value.
inline std::string value_to_string(const json& value, const std::optional<std::string>& unit = {}) {
    std::string out;
    auto scalar = [](const json& v) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
        if (v.is_number()) return text::format_number(v.get<double>());
        if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
        return v.dump();
    };
    if (value.is_array()) {
        std::vector<std::string> parts;
        for (const auto& v : value) parts.push_back(scalar(v) + (unit ? " " + *unit : ""));
        return text::join(parts, "; ");
    }
    out = scalar(value);
    if (unit && value.is_number()) out += " " + *unit;
    return out;
}

/// Coerces a JSON value produced by a model: native numbers and booleans are
/// accepted directly, strings go through coerce_value, null stays null.
inline Coerced coerce_json(const FieldSpec& spec, const json& raw,
                           const UnitTable& units = default_unit_table()) {
    if (raw.is_null()) return Coerced{nullptr, std::nullopt, std::nullopt};
    if (raw.is_string()) return coerce_value(spec, raw.get<std::string>(), units);
    if (raw.is_array()) {
        if (!spec.dtype.is_list) return detail::fail("array given for scalar field " + spec.name);
        std::vector<std::string> parts;
        for (const auto& item : raw) {
            if (item.is_array() || item.is_object()) return detail::fail("nested value in list");
            parts.push_back(value_to_string(item));
        }
        return coerce_value(spec, text::join(parts, ";"), units);
    }
    if (raw.is_object()) return detail::fail("object given for field " + spec.name);
    return coerce_value(spec, value_to_string(raw), units);
}

/// Structural conformance of a field→value object. Nulls are always permitted.
inline std::vector<std::string> validate_values(const json& values, const Schema& schema) {
    std::vector<std::string> violations;
    if (!values.is_object()) return {"values must be an object"};
    auto scalar_ok = [](const FieldSpec& f, const json& v) {
        switch (f.dtype.base) {
            case BaseType::String: return v.is_string();
            case BaseType::Float: return v.is_number();
            case BaseType::Integer: return v.is_number_integer();
            case BaseType::Boolean: return v.is_boolean();
            case BaseType::Categorical:
                if (!v.is_string()) return false;
                for (const auto& term : f.vocabulary)
                    if (term == v.get<std::string>()) return true;
                return false;
        }
        return false;
    };
    for (const auto& [name, v] : values.items()) {
        const FieldSpec* f = schema.find(name);
        if (!f) {
            violations.push_back("unknown field " + name);
            continue;
        }
        if (v.is_null()) continue;
        bool ok = true;
        if (f->dtype.is_list) {
            ok = v.is_array();
            if (ok)
                for (const auto& item : v) ok = ok && scalar_ok(*f, item);
        } else {
            ok = scalar_ok(*f, v);
        }
        if (!ok) violations.push_back("field " + name + " does not conform to " + to_string(f->dtype));
    }
    return violations;
}

}  // namespace schemaflow
