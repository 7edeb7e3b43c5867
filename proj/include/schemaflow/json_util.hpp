#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemaflow/error.hpp"

namespace schemaflow {

using json = nlohmann::json;

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

inline std::string index_path(const std::string& base, std::size_t i) {
    return base + "[" + std::to_string(i) + "]";
}

inline const json& require_object(const json& v, const std::string& path) {
    if (!v.is_object()) throw Error(ErrorCode::InvalidValue, path, "expected object");
    return v;
}

inline const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
}

inline std::string get_string(const json& obj, const char* key, const std::string& base) {
    const json* v = find(obj, key);
    auto path = join_path(base, key);
    if (!v) throw Error(ErrorCode::MissingField, path);
    if (!v->is_string()) throw Error(ErrorCode::InvalidValue, path, "expected string");
    return v->get<std::string>();
}

inline std::optional<std::string> get_opt_string(const json& obj, const char* key,
                                                 const std::string& base) {
    const json* v = find(obj, key);
    if (!v) return std::nullopt;
    if (!v->is_string())
        throw Error(ErrorCode::InvalidValue, join_path(base, key), "expected string");
    return v->get<std::string>();
}

inline std::int64_t get_int(const json& obj, const char* key, const std::string& base) {
    const json* v = find(obj, key);
    auto path = join_path(base, key);
    if (!v) throw Error(ErrorCode::MissingField, path);
    if (v->is_number_integer()) return v->get<std::int64_t>();
    if (v->is_number_float()) {
        double d = v->get<double>();
        if (std::isfinite(d) && d == std::floor(d) && std::fabs(d) < 9e15)
            return static_cast<std::int64_t>(d);
    }
    throw Error(ErrorCode::InvalidValue, path, "expected integer");
}

inline double get_number(const json& obj, const char* key, const std::string& base) {
    const json* v = find(obj, key);
    auto path = join_path(base, key);
    if (!v) throw Error(ErrorCode::MissingField, path);
    if (!v->is_number()) throw Error(ErrorCode::InvalidValue, path, "expected number");
    double d = v->get<double>();
    if (!std::isfinite(d)) throw Error(ErrorCode::InvalidValue, path, "not finite");
    return d;
}

inline bool get_bool(const json& obj, const char* key, const std::string& base,
                     std::optional<bool> fallback = std::nullopt) {
    const json* v = find(obj, key);
    auto path = join_path(base, key);
    if (!v) {
        if (fallback) return *fallback;
        throw Error(ErrorCode::MissingField, path);
    }
    if (!v->is_boolean()) throw Error(ErrorCode::InvalidValue, path, "expected boolean");
    return v->get<bool>();
}

inline const json& get_array(const json& obj, const char* key, const std::string& base,
                             bool required = true) {
    static const json empty = json::array();
    const json* v = find(obj, key);
    auto path = join_path(base, key);
    if (!v) {
        if (required) throw Error(ErrorCode::MissingField, path);
        return empty;
    }
    if (!v->is_array()) throw Error(ErrorCode::InvalidValue, path, "expected array");
    return *v;
}

}  // namespace detail

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, path.string(), "cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, path.string(), "cannot open for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::IoFailure, path.string(), "write failed");
}

inline json parse_json_file(const std::filesystem::path& path) {
    auto text = read_file(path);
    auto v = json::parse(text, nullptr, false);
    if (v.is_discarded()) throw Error(ErrorCode::InvalidValue, path.string(), "malformed JSON");
    return v;
}

/// One JSON value per non-blank line.
inline std::vector<json> parse_json_lines(std::string_view text, const std::string& origin = {}) {
    std::vector<json> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        ++line_no;
        bool blank = line.find_first_not_of(" \t\r") == std::string_view::npos;
        if (!blank) {
            auto v = json::parse(line, nullptr, false);
            if (v.is_discarded())
                throw Error(ErrorCode::InvalidValue, origin + ":" + std::to_string(line_no),
                            "malformed JSON line");
            out.push_back(std::move(v));
        }
        start = end + 1;
    }
    return out;
}

/// Total order on JSON values: null < boolean < number < string < array <
/// object. Numbers compare by value, arrays lexicographically, objects by
/// their serialization. Used instead of json's own operator<, which does not
/// order arrays reliably under C++20 in every library release.
struct json_less {
    static int rank(const json& v) {
        if (v.is_null()) return 0;
        if (v.is_boolean()) return 1;
        if (v.is_number()) return 2;
        if (v.is_string()) return 3;
        if (v.is_array()) return 4;
        return 5;
    }

    bool operator()(const json& a, const json& b) const {
        int ra = rank(a), rb = rank(b);
        if (ra != rb) return ra < rb;
        switch (ra) {
            case 0: return false;
            case 1: return !a.get<bool>() && b.get<bool>();
            case 2: return a.get<double>() < b.get<double>();
            case 3: return a.get_ref<const std::string&>() < b.get_ref<const std::string&>();
            case 4:
                return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), json_less{});
            default: return a.dump() < b.dump();
        }
    }
};

inline std::string to_json_lines(const std::vector<json>& values) {
    std::string out;
    for (const auto& v : values) {
        out += v.dump();
        out += '\n';
    }
    return out;
}

}  // namespace schemaflow
