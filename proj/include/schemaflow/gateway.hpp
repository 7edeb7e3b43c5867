#pragma once

// Single choke point for model access. Every request goes through a named
// profile, gets retried on transient failures, and leaves an audit entry.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "schemaflow/json_util.hpp"
#include "schemaflow/schema.hpp"
#include "schemaflow/sha256.hpp"
#include "schemaflow/text.hpp"

namespace schemaflow {

enum class AttachmentKind { ImageUri, FigureJson, TableText };

constexpr std::string_view to_string(AttachmentKind k) {
    switch (k) {
        case AttachmentKind::ImageUri: return "image_uri";
        case AttachmentKind::FigureJson: return "figure_json";
        case AttachmentKind::TableText: return "table_text";
    }
    return "image_uri";
}

struct Attachment {
    AttachmentKind kind = AttachmentKind::ImageUri;
    std::string payload;
};

struct PromptRequest {
    std::string model_profile;
    std::string system;
    std::string user;
    std::vector<Attachment> attachments;
    double temperature = 0.0;
    int max_output_tokens = 2048;
};

struct Usage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
};

struct CompletionResponse {
    std::string text;
    std::string model_profile;
    Usage usage;
    std::int64_t latency_ms = 0;
};

/// SHA-256 over (system, user, attachment digests). Mock scripts key on this.
inline std::string fingerprint(const PromptRequest& req) {
    std::string material;
    material += "system\x1f";
    material += req.system;
    material += "\x1euser\x1f";
    material += req.user;
    for (const auto& a : req.attachments) {
        material += "\x1e";
        material += to_string(a.kind);
        material += "\x1f";
        material += sha256_hex(a.payload);
    }
    return sha256_hex(material);
}

struct ProfileConfig {
    std::string name;
    std::string backend = "mock";  // mock | http
    std::string endpoint;
    std::string model;
    std::string api_key_env;
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{200};
    std::chrono::milliseconds backoff_max{5000};
    std::chrono::milliseconds min_interval{0};
    std::chrono::milliseconds timeout{60000};
};

/// Transport behind a profile. Implementations throw schemaflow::Error;
/// transient codes (Timeout, RateLimited, ServiceUnavailable) are retried.
class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResponse send(const PromptRequest& req, const ProfileConfig& profile) = 0;
};

// ---------------------------------------------------------------------------
// Mock backend

/// Scripted responses keyed by request fingerprint. Entries may instead carry
/// a substring `match` rule, tried in script order after fingerprint lookup.
/// Repeated calls walk `responses`; the last one repeats.
struct MockEntry {
    std::optional<std::string> fingerprint;
    std::string system_contains;
    std::vector<std::string> user_contains;
    std::vector<std::string> responses;
    int fail_first = 0;
    ErrorCode failure = ErrorCode::Timeout;
};

struct MockMiss {
    std::string fingerprint;
    std::string system;
    std::string user;
};

class MockBackend : public Backend {
public:
    MockBackend() = default;
    explicit MockBackend(std::vector<MockEntry> entries) {
        for (auto& e : entries) add(std::move(e));
    }

    void add(MockEntry entry) {
        std::lock_guard lock(mutex_);
        if (entry.fingerprint) {
            auto it = by_fingerprint_.find(*entry.fingerprint);
            if (it != by_fingerprint_.end()) {
                auto& existing = entries_[it->second].entry;
                existing.responses.insert(existing.responses.end(), entry.responses.begin(),
                                          entry.responses.end());
                return;
            }
            by_fingerprint_[*entry.fingerprint] = entries_.size();
        }
        entries_.push_back({std::move(entry), 0});
    }

    void add_response(const std::string& fp, std::string text) {
        MockEntry e;
        e.fingerprint = fp;
        e.responses.push_back(std::move(text));
        add(std::move(e));
    }

    /// Script file: JSON list of {fingerprint, response_text}, optionally with
    /// "responses", "fail_first", "failure", or a "match" rule instead of a fingerprint.
    static std::shared_ptr<MockBackend> from_json(const json& script) {
        const json& list = script.is_object() && script.contains("entries") ? script["entries"] : script;
        if (!list.is_array()) throw Error(ErrorCode::ConfigError, "mock_script", "expected a list");
        auto mock = std::make_shared<MockBackend>();
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto& raw = list[i];
            auto path = detail::index_path("mock_script", i);
            if (!raw.is_object()) throw Error(ErrorCode::ConfigError, path, "expected object");
            MockEntry e;
            e.fingerprint = detail::get_opt_string(raw, "fingerprint", path);
            if (auto text = detail::get_opt_string(raw, "response_text", path))
                e.responses.push_back(*text);
            for (const auto& r : detail::get_array(raw, "responses", path, false)) {
                if (!r.is_string()) throw Error(ErrorCode::ConfigError, path + ".responses", "expected strings");
                e.responses.push_back(r.get<std::string>());
            }
            if (detail::find(raw, "fail_first")) e.fail_first = static_cast<int>(detail::get_int(raw, "fail_first", path));
            auto failure = detail::get_opt_string(raw, "failure", path).value_or("timeout");
            if (failure == "timeout") e.failure = ErrorCode::Timeout;
            else if (failure == "rate_limited") e.failure = ErrorCode::RateLimited;
            else if (failure == "unavailable") e.failure = ErrorCode::ServiceUnavailable;
            else if (failure == "auth") e.failure = ErrorCode::AuthFailure;
            else throw Error(ErrorCode::ConfigError, path + ".failure", failure);
            if (const json* match = detail::find(raw, "match")) {
                e.system_contains = detail::get_opt_string(*match, "system_contains", path + ".match").value_or("");
                const json* uc = detail::find(*match, "user_contains");
                if (uc && uc->is_string()) e.user_contains.push_back(uc->get<std::string>());
                else if (uc && uc->is_array())
                    for (const auto& s : *uc) e.user_contains.push_back(s.get<std::string>());
            }
            if (!e.fingerprint && e.system_contains.empty() && e.user_contains.empty())
                throw Error(ErrorCode::ConfigError, path, "entry needs a fingerprint or a match rule");
            if (e.responses.empty()) throw Error(ErrorCode::ConfigError, path, "entry has no response");
            mock->add(std::move(e));
        }
        return mock;
    }

    CompletionResponse send(const PromptRequest& req, const ProfileConfig& profile) override {
        auto fp = fingerprint(req);
        std::lock_guard lock(mutex_);
        State* state = nullptr;
        if (auto it = by_fingerprint_.find(fp); it != by_fingerprint_.end()) {
            state = &entries_[it->second];
        } else {
            for (auto& s : entries_) {
                if (s.entry.fingerprint) continue;
                if (!s.entry.system_contains.empty() && !text::contains(req.system, s.entry.system_contains))
                    continue;
                bool all = std::all_of(s.entry.user_contains.begin(), s.entry.user_contains.end(),
                                       [&](const std::string& needle) { return text::contains(req.user, needle); });
                if (all) {
                    state = &s;
                    break;
                }
            }
        }
        if (!state) {
            misses_.push_back({fp, req.system, req.user});
            throw Error(ErrorCode::MockUnmatched, fp,
                        "no scripted response; user prompt begins: " + req.user.substr(0, 120));
        }
        int call = state->calls++;
        if (call < state->entry.fail_first)
            throw Error(state->entry.failure, profile.name, "scripted failure");
        auto idx = static_cast<std::size_t>(call - state->entry.fail_first);
        const auto& responses = state->entry.responses;
        CompletionResponse resp;
        resp.text = responses[std::min(idx, responses.size() - 1)];
        resp.model_profile = profile.name;
        auto approx_tokens = [](std::size_t chars) { return static_cast<std::int64_t>((chars + 3) / 4); };
        resp.usage.input_tokens = approx_tokens(req.system.size() + req.user.size());
        resp.usage.output_tokens = approx_tokens(resp.text.size());
        return resp;
    }

    std::vector<MockMiss> misses() const {
        std::lock_guard lock(mutex_);
        return misses_;
    }

private:
    struct State {
        MockEntry entry;
        int calls = 0;
    };
    mutable std::mutex mutex_;
    std::vector<State> entries_;
    std::map<std::string, std::size_t> by_fingerprint_;
    std::vector<MockMiss> misses_;
};

// ---------------------------------------------------------------------------
// Structured output

/// Validates (and may coerce) a parsed JSON value; throws Error on rejection.
struct StructuredTarget {
    std::string description;
    std::function<json(const json&)> validate;
};

struct StructuredResult {
    json value;
    int repair_count = 0;
    std::string raw_text;
};

namespace detail {

inline std::optional<std::size_t> balanced_end(std::string_view s, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = start; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{' || c == '[') ++depth;
        else if (c == '}' || c == ']') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::nullopt;
}

}  // namespace detail

/// Pulls a JSON value out of model output: the whole text, a fenced block,
/// or the first balanced object/array that parses.
inline std::optional<json> extract_json(std::string_view text) {
    auto whole = json::parse(text::trim(text), nullptr, false);
    if (!whole.is_discarded()) return whole;
    if (auto fence = text.find("```"); fence != std::string_view::npos) {
        auto body_start = text.find('\n', fence);
        auto fence_end = body_start == std::string_view::npos ? body_start : text.find("```", body_start);
        if (fence_end != std::string_view::npos) {
            auto body = json::parse(text.substr(body_start, fence_end - body_start), nullptr, false);
            if (!body.is_discarded()) return body;
        }
    }
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{' && text[i] != '[') continue;
        auto end = detail::balanced_end(text, i);
        if (!end) continue;
        auto candidate = json::parse(text.substr(i, *end - i), nullptr, false);
        if (!candidate.is_discarded()) return candidate;
    }
    return std::nullopt;
}

/// Flat object of schema fields; every present value must coerce.
inline StructuredTarget record_target(const Schema& schema, const UnitTable& units = default_unit_table()) {
    return {"a JSON object mapping field names to values: " + to_json(schema).dump(),
            [schema, units](const json& value) {
                if (!value.is_object()) throw Error(ErrorCode::InvalidValue, "$", "expected a JSON object");
                json out = json::object();
                for (const auto& [name, raw] : value.items()) {
                    const FieldSpec* f = schema.find(name);
                    if (!f) throw Error(ErrorCode::UnknownKey, name, "not a schema field");
                    auto c = coerce_json(*f, raw, units);
                    if (!c.ok()) throw Error(ErrorCode::InvalidValue, name, *c.failure);
                    out[name] = c.value;
                }
                return out;
            }};
}

namespace detail {

inline void check_shape(const json& shape, const json& value, const std::string& path) {
    auto type = shape.value("type", std::string("any"));
    auto fail = [&](const std::string& why) { throw Error(ErrorCode::InvalidValue, path, why); };
    if (type == "object") {
        if (!value.is_object()) fail("expected object");
        for (const auto& req : shape.value("required", json::array()))
            if (!value.contains(req.get<std::string>())) fail("missing '" + req.get<std::string>() + "'");
        if (auto props = shape.find("properties"); props != shape.end())
            for (const auto& [k, sub] : props->items())
                if (value.contains(k)) check_shape(sub, value[k], join_path(path, k));
    } else if (type == "array") {
        if (!value.is_array()) fail("expected array");
        if (auto items = shape.find("items"); items != shape.end())
            for (std::size_t i = 0; i < value.size(); ++i) check_shape(*items, value[i], index_path(path, i));
    } else if (type == "string") {
        if (!value.is_string()) fail("expected string");
    } else if (type == "number") {
        if (!value.is_number()) fail("expected number");
    } else if (type == "integer") {
        if (!value.is_number_integer()) fail("expected integer");
    } else if (type == "boolean") {
        if (!value.is_boolean()) fail("expected boolean");
    } else if (type == "null") {
        if (!value.is_null()) fail("expected null");
    }
}

}  // namespace detail

/// Minimal JSON-shape target: {"type", "properties", "required", "items"}.
inline StructuredTarget shape_target(json shape) {
    auto desc = "JSON matching this shape: " + shape.dump();
    return {desc, [shape = std::move(shape)](const json& value) {
                detail::check_shape(shape, value, "$");
                return value;
            }};
}

// ---------------------------------------------------------------------------
// Gateway

struct AuditEntry {
    std::uint64_t seq = 0;
    std::string profile;
    std::string fingerprint;
    std::string response_digest;
    int retry_count = 0;
    std::vector<std::int64_t> backoff_ms;
    std::string outcome = "ok";
    std::int64_t latency_ms = 0;
    Usage usage;
};

inline json to_json(const AuditEntry& e) {
    return {{"seq", e.seq},
            {"profile", e.profile},
            {"fingerprint", e.fingerprint},
            {"response_digest", e.response_digest},
            {"retry_count", e.retry_count},
            {"backoff_ms", e.backoff_ms},
            {"outcome", e.outcome},
            {"latency_ms", e.latency_ms},
            {"input_tokens", e.usage.input_tokens},
            {"output_tokens", e.usage.output_tokens}};
}

class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    Gateway() : sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

    void add_profile(ProfileConfig profile, std::shared_ptr<Backend> backend) {
        require(backend != nullptr, "gateway profile needs a backend");
        require(profile.max_retries >= 0, "max_retries must be >= 0");
        auto name = profile.name;
        auto slot = std::make_unique<Slot>();
        slot->profile = std::move(profile);
        slot->backend = std::move(backend);
        profiles_[name] = std::move(slot);
    }

    bool has_profile(const std::string& name) const { return profiles_.count(name) > 0; }

    /// Test hook: replaces real sleeping between retries.
    void set_sleeper(Sleeper s) { sleeper_ = std::move(s); }

    static std::chrono::milliseconds backoff_delay(const ProfileConfig& p, int attempt) {
        auto d = p.backoff_base.count();
        for (int i = 0; i < attempt && d < p.backoff_max.count(); ++i) d *= 2;
        return std::chrono::milliseconds(std::min<std::int64_t>(d, p.backoff_max.count()));
    }

    CompletionResponse complete(const PromptRequest& req) {
        require(!req.user.empty(), "prompt user text must be non-empty");
        require(req.temperature >= 0.0, "temperature must be >= 0");
        auto it = profiles_.find(req.model_profile);
        if (it == profiles_.end()) throw Error(ErrorCode::ProfileUnknown, req.model_profile);
        Slot& slot = *it->second;

        AuditEntry entry;
        entry.profile = req.model_profile;
        entry.fingerprint = fingerprint(req);
        const auto& profile = slot.profile;
        for (int attempt = 0;; ++attempt) {
            try {
                throttle(slot);
                auto start = std::chrono::steady_clock::now();
                auto resp = slot.backend->send(req, profile);
                resp.model_profile = profile.name;
                resp.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                      std::chrono::steady_clock::now() - start)
                                      .count();
                entry.response_digest = sha256_hex(resp.text);
                entry.latency_ms = resp.latency_ms;
                entry.usage = resp.usage;
                record(std::move(entry));
                return resp;
            } catch (const Error& e) {
                if (!is_transient(e.code()) || attempt >= profile.max_retries) {
                    entry.outcome = std::string(to_string(e.code()));
                    record(std::move(entry));
                    throw;
                }
                auto delay = backoff_delay(profile, attempt);
                entry.backoff_ms.push_back(delay.count());
                entry.retry_count = attempt + 1;
                sleeper_(delay);
            } catch (const std::exception& e) {
                entry.outcome = "GatewayError";
                record(std::move(entry));
                throw Error(ErrorCode::GatewayError, req.model_profile, e.what());
            }
        }
    }

    /// Parses and validates the response against `target`; on rejection,
    /// re-asks with the validator error appended, up to `max_repairs` times.
    StructuredResult complete_structured(PromptRequest req, const StructuredTarget& target,
                                         int max_repairs = 2) {
        const std::string original_user = req.user;
        std::string last_error;
        std::string raw;
        for (int round = 0; round <= max_repairs; ++round) {
            if (round > 0) {
                req.user = original_user + "\n\nYour previous response was rejected: " + last_error +
                           "\nPrevious response:\n" + raw +
                           "\nRespond again with only valid JSON matching " + target.description;
            }
            raw = complete(req).text;
            auto parsed = extract_json(raw);
            if (!parsed) {
                last_error = "response is not valid JSON";
                continue;
            }
            try {
                return {target.validate(*parsed), round, raw};
            } catch (const Error& e) {
                last_error = e.what();
            }
        }
        throw Error(ErrorCode::StructureInvalidAfterRepair, req.model_profile,
                    last_error + "; last response: " + raw);
    }

    std::vector<AuditEntry> audit() const {
        std::lock_guard lock(audit_mutex_);
        return audit_;
    }

    std::string audit_jsonl() const {
        std::vector<json> lines;
        for (const auto& e : audit()) lines.push_back(to_json(e));
        return to_json_lines(lines);
    }

private:
    struct Slot {
        ProfileConfig profile;
        std::shared_ptr<Backend> backend;
        std::mutex limiter;
        std::chrono::steady_clock::time_point last_call;
    };

    void throttle(Slot& slot) {
        if (slot.profile.min_interval.count() <= 0) return;
        std::lock_guard lock(slot.limiter);
        auto ready = slot.last_call + slot.profile.min_interval;
        auto now = std::chrono::steady_clock::now();
        if (now < ready) std::this_thread::sleep_for(ready - now);
        slot.last_call = std::chrono::steady_clock::now();
    }

    void record(AuditEntry entry) {
        std::lock_guard lock(audit_mutex_);
        entry.seq = audit_.size() + 1;
        audit_.push_back(std::move(entry));
    }

    std::map<std::string, std::unique_ptr<Slot>> profiles_;
    Sleeper sleeper_;
    mutable std::mutex audit_mutex_;
    std::vector<AuditEntry> audit_;
};

}  // namespace schemaflow
