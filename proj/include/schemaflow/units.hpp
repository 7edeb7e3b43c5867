#pragma once

// Affine unit conversion table. This is the single source of truth for unit
// symbols: schema parsing and value coercion canonicalize aliases through it.

#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "schemaflow/json_util.hpp"
#include "schemaflow/text.hpp"

namespace schemaflow {

/// canonical = raw * scale + offset
struct UnitRule {
    std::string from_unit;
    std::string to_unit;
    double scale = 1.0;
    double offset = 0.0;

    double apply(double raw) const { return raw * scale + offset; }
    UnitRule inverse() const { return {to_unit, from_unit, 1.0 / scale, -offset / scale}; }
    bool operator==(const UnitRule&) const = default;
};

class UnitTable {
public:
    UnitTable() = default;

    /// Temperature, volume, time, and length multiples plus common spellings.
    static UnitTable builtin() {
        UnitTable t;
        t.add_rule({"F", "C", 5.0 / 9.0, -160.0 / 9.0});
        t.add_rule({"K", "C", 1.0, -273.15});
        t.add_rule({"mL", "L", 1e-3, 0.0});
        t.add_rule({"uL", "mL", 1e-3, 0.0});
        t.add_rule({"min", "h", 1.0 / 60.0, 0.0});
        t.add_rule({"s", "min", 1.0 / 60.0, 0.0});
        t.add_rule({"h", "d", 1.0 / 24.0, 0.0});
        t.add_rule({"mm", "m", 1e-3, 0.0});
        t.add_rule({"cm", "m", 1e-2, 0.0});
        t.add_rule({"nm", "m", 1e-9, 0.0});
        t.add_rule({"mg/L", "ug/mL", 1.0, 0.0});

        for (auto [alias, canon] : std::initializer_list<std::pair<const char*, const char*>>{
                 {"°C", "C"}, {"ºC", "C"}, {"℃", "C"}, {"degC", "C"}, {"deg C", "C"},
                 {"celsius", "C"}, {"°F", "F"}, {"ºF", "F"}, {"℉", "F"}, {"degF", "F"},
                 {"deg F", "F"}, {"fahrenheit", "F"}, {"kelvin", "K"}, {"ml", "mL"},
                 {"milliliter", "mL"}, {"milliliters", "mL"}, {"µL", "uL"}, {"μL", "uL"},
                 {"ul", "uL"}, {"l", "L"}, {"liter", "L"}, {"liters", "L"}, {"litre", "L"},
                 {"minute", "min"}, {"minutes", "min"}, {"mins", "min"}, {"hour", "h"},
                 {"hours", "h"}, {"hr", "h"}, {"hrs", "h"}, {"day", "d"}, {"days", "d"},
                 {"sec", "s"}, {"second", "s"}, {"seconds", "s"}, {"percent", "%"},
                 {"% RH", "%"}, {"%RH", "%"}, {"pct", "%"}}) {
            t.add_alias(alias, canon);
        }
        return t;
    }

    void add_rule(UnitRule rule) {
        require(rule.scale != 0.0 && std::isfinite(rule.scale) && std::isfinite(rule.offset),
                "unit rule needs a finite non-zero scale");
        auto key = std::make_pair(rule.from_unit, rule.to_unit);
        if (rules_.count(key))
            throw Error(ErrorCode::InvalidValue, rule.from_unit + "->" + rule.to_unit,
                        "duplicate unit rule");
        rules_.emplace(key, std::move(rule));
    }

    void add_alias(const std::string& alias, const std::string& canonical) {
        aliases_[text::casefold_trim(alias)] = canonical;
    }

    /// Maps a spelled unit to its canonical symbol; unknown symbols pass through trimmed.
    std::string canonical_symbol(std::string_view unit) const {
        auto trimmed = std::string(text::trim(unit));
        auto it = aliases_.find(text::casefold(trimmed));
        return it == aliases_.end() ? trimmed : it->second;
    }

    /// Shortest chain of direct or inverted rules; nullopt when unreachable.
    std::optional<UnitRule> conversion(const std::string& from, const std::string& to) const {
        auto src = canonical_symbol(from);
        auto dst = canonical_symbol(to);
        if (src == dst) return UnitRule{src, dst, 1.0, 0.0};
        std::map<std::string, std::vector<UnitRule>> adj;
        for (const auto& [key, rule] : rules_) {
            adj[rule.from_unit].push_back(rule);
            adj[rule.to_unit].push_back(rule.inverse());
        }
        std::map<std::string, UnitRule> reached{{src, UnitRule{src, src, 1.0, 0.0}}};
        std::deque<std::string> frontier{src};
        while (!frontier.empty()) {
            auto unit = frontier.front();
            frontier.pop_front();
            const auto acc = reached.at(unit);
            for (const auto& step : adj[unit]) {
                if (reached.count(step.to_unit)) continue;
                UnitRule composed{src, step.to_unit, acc.scale * step.scale,
                                  step.scale * acc.offset + step.offset};
                if (step.to_unit == dst) return composed;
                reached.emplace(step.to_unit, composed);
                frontier.push_back(step.to_unit);
            }
        }
        return std::nullopt;
    }

    const std::map<std::pair<std::string, std::string>, UnitRule>& rules() const { return rules_; }
    const std::map<std::string, std::string>& aliases() const { return aliases_; }

    /// {"rules": [{from_unit, to_unit, scale, offset}], "aliases": {alias: canonical}}
    static UnitTable from_json(const json& raw, bool include_builtin = true) {
        UnitTable t = include_builtin ? builtin() : UnitTable{};
        detail::require_object(raw, "unit_rules");
        const auto& rules = detail::get_array(raw, "rules", "unit_rules", false);
        for (std::size_t i = 0; i < rules.size(); ++i) {
            auto p = detail::index_path("unit_rules.rules", i);
            detail::require_object(rules[i], p);
            UnitRule r{detail::get_string(rules[i], "from_unit", p),
                       detail::get_string(rules[i], "to_unit", p),
                       detail::get_number(rules[i], "scale", p),
                       detail::find(rules[i], "offset") ? detail::get_number(rules[i], "offset", p)
                                                        : 0.0};
            if (r.scale == 0.0) throw Error(ErrorCode::InvalidValue, p + ".scale", "scale is zero");
            t.rules_.insert_or_assign({r.from_unit, r.to_unit}, r);
        }
        if (const json* aliases = detail::find(raw, "aliases")) {
            if (!aliases->is_object())
                throw Error(ErrorCode::InvalidValue, "unit_rules.aliases", "expected object");
            for (const auto& [alias, canon] : aliases->items()) {
                if (!canon.is_string())
                    throw Error(ErrorCode::InvalidValue, "unit_rules.aliases." + alias,
                                "expected string");
                t.add_alias(alias, canon.get<std::string>());
            }
        }
        return t;
    }

private:
    std::map<std::pair<std::string, std::string>, UnitRule> rules_;
    std::map<std::string, std::string> aliases_;
};

inline const UnitTable& default_unit_table() {
    static const UnitTable table = UnitTable::builtin();
    return table;
}

}  // namespace schemaflow
