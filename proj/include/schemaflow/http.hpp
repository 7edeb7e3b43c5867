#pragma once

// HTTP backends: an OpenAI-compatible chat-completions client for the gateway
// and a JSON embedding endpoint client. Requires cpp-httplib (define
// CPPHTTPLIB_OPENSSL_SUPPORT for https endpoints).

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>

#include "schemaflow/embedding.hpp"
#include "schemaflow/gateway.hpp"

namespace schemaflow {

namespace detail {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

inline SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "endpoint", "missing scheme in " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline httplib::Headers auth_headers(const std::string& api_key_env) {
    httplib::Headers headers;
    if (api_key_env.empty()) return headers;
    const char* key = std::getenv(api_key_env.c_str());
    if (!key || !*key) throw Error(ErrorCode::AuthFailure, api_key_env, "environment variable is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
    return headers;
}

inline ErrorCode status_error(int status) {
    if (status == 401 || status == 403) return ErrorCode::AuthFailure;
    if (status == 429) return ErrorCode::RateLimited;
    if (status >= 500) return ErrorCode::ServiceUnavailable;
    return ErrorCode::GatewayError;
}

inline httplib::Result post_json(const std::string& url, const httplib::Headers& headers, const json& body,
                                 std::chrono::milliseconds timeout) {
    auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    return client.Post(path, headers, body.dump(), "application/json");
}

}  // namespace detail

class HttpBackend final : public Backend {
public:
    static json build_body(const PromptRequest& req, const ProfileConfig& profile) {
        json content = json::array();
        content.push_back({{"type", "text"}, {"text", req.user}});
        for (const auto& a : req.attachments) {
            switch (a.kind) {
                case AttachmentKind::ImageUri:
                    content.push_back({{"type", "image_url"}, {"image_url", {{"url", a.payload}}}});
                    break;
                case AttachmentKind::FigureJson:
                    content.push_back({{"type", "text"}, {"text", "Figure data (JSON):\n" + a.payload}});
                    break;
                case AttachmentKind::TableText:
                    content.push_back({{"type", "text"}, {"text", "Table:\n" + a.payload}});
                    break;
            }
        }
        json messages = json::array();
        if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
        messages.push_back({{"role", "user"}, {"content", content}});
        return {{"model", profile.model},
                {"messages", messages},
                {"temperature", req.temperature},
                {"max_tokens", req.max_output_tokens}};
    }

    CompletionResponse send(const PromptRequest& req, const ProfileConfig& profile) override {
        auto started = std::chrono::steady_clock::now();
        auto res = detail::post_json(profile.endpoint, detail::auth_headers(profile.api_key_env), build_body(req, profile),
                                     profile.timeout);
        if (!res) throw Error(ErrorCode::Timeout, profile.name, httplib::to_string(res.error()));
        if (res->status != 200)
            throw Error(detail::status_error(res->status), profile.name, "HTTP " + std::to_string(res->status));
        json body = json::parse(res->body, nullptr, false);
        if (body.is_discarded() || !body.contains("choices") || body["choices"].empty())
            throw Error(ErrorCode::GatewayError, profile.name, "malformed completion response");
        const auto& message = body["choices"][0].value("message", json::object());
        CompletionResponse out;
        out.model_profile = profile.name;
        const json& content = message.value("content", json(""));
        if (content.is_string()) {
            out.text = content.get<std::string>();
        } else if (content.is_array()) {
            for (const auto& part : content)
                if (part.is_object() && part.value("type", "") == "text") out.text += part.value("text", "");
        }
        if (body.contains("usage") && body["usage"].is_object()) {
            out.usage.input_tokens = body["usage"].value("prompt_tokens", std::int64_t{0});
            out.usage.output_tokens = body["usage"].value("completion_tokens", std::int64_t{0});
        }
        out.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
        return out;
    }
};

/// POST {"texts": [...]} → {"vectors": [[...], ...]}. Vectors are
/// normalized on receipt. Transient failures are retried with backoff, then
/// surface as ServiceUnavailable.
class HttpEmbedder final : public Embedder {
public:
    struct Options {
        std::string endpoint;
        std::string tag;
        std::size_t dimension = 0;
        std::string api_key_env;
        int max_retries = 3;
        std::chrono::milliseconds backoff_base{200};
        std::chrono::milliseconds timeout{30000};
    };

    explicit HttpEmbedder(Options options) : options_(std::move(options)) {
        if (options_.dimension == 0) throw Error(ErrorCode::ConfigError, "embedder.dimension", "must be positive");
        if (options_.tag.empty()) options_.tag = "http:" + options_.endpoint;
    }

    std::size_t dimension() const override { return options_.dimension; }
    std::string tag() const override { return options_.tag; }

    EmbeddingVector embed(std::string_view text) const override { return embed_batch({std::string(text)}).front(); }

    std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const override {
        for (const auto& t : texts)
            if (text::trim(t).empty()) throw Error(ErrorCode::EmptyText, "embed");
        if (texts.empty()) return {};
        auto headers = detail::auth_headers(options_.api_key_env);
        std::string last_error;
        for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(options_.backoff_base * (1 << (attempt - 1)));
            auto res = detail::post_json(options_.endpoint, headers, json{{"texts", texts}}, options_.timeout);
            if (!res) {
                last_error = httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw Error(detail::status_error(res->status), "embedder", "HTTP " + std::to_string(res->status));
            return parse_vectors(res->body, texts.size());
        }
        throw Error(ErrorCode::ServiceUnavailable, "embedder", last_error);
    }

private:
    std::vector<EmbeddingVector> parse_vectors(const std::string& body, std::size_t expected) const {
        json parsed = json::parse(body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("vectors") || !parsed["vectors"].is_array() ||
            parsed["vectors"].size() != expected)
            throw Error(ErrorCode::GatewayError, "embedder", "malformed embedding response");
        std::vector<EmbeddingVector> out;
        for (const auto& v : parsed["vectors"]) {
            EmbeddingVector e;
            try {
                e.values = v.get<std::vector<double>>();
            } catch (const json::exception&) {
                throw Error(ErrorCode::GatewayError, "embedder", "non-numeric vector");
            }
            if (e.values.size() != options_.dimension)
                throw Error(ErrorCode::DimensionMismatch, "embedder",
                            "got " + std::to_string(e.values.size()) + ", expected " + std::to_string(options_.dimension));
            out.push_back(normalized(std::move(e)));
        }
        return out;
    }

    Options options_;
};

}  // namespace schemaflow
