#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "schemaflow/error.hpp"

namespace schemaflow {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
    return s;
}

inline double l2_norm(const EmbeddingVector& v) { return std::sqrt(dot(v, v)); }

/// Scales to unit length. Zero or non-finite input is a contract violation.
inline EmbeddingVector normalized(EmbeddingVector v) {
    for (double x : v.values) require(std::isfinite(x), "embedding values must be finite");
    double n = l2_norm(v);
    require(n > 0.0, "cannot normalize a zero vector");
    for (double& x : v.values) x /= n;
    return v;
}

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dimension() const = 0;
    /// Identifies the embedding space; stores refuse queries from another space.
    virtual std::string tag() const = 0;
    virtual EmbeddingVector embed(std::string_view text) const = 0;

    virtual std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) const {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed(t));
        return out;
    }
};

/// Deterministic hashed bag-of-words: lowercase tokens split on
/// non-alphanumerics, FNV-1a into `dimension` buckets, counted, L2-normalized.
class HashingEmbedder final : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dimension = 256) : dimension_(dimension) {
        require(dimension > 0, "embedder dimension must be positive");
    }

    std::size_t dimension() const override { return dimension_; }
    std::string tag() const override { return "hashing-fnv1a-" + std::to_string(dimension_); }

    static std::uint64_t fnv1a(std::string_view s) {
        std::uint64_t h = 14695981039346656037ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        return h;
    }

    // Bytes >= 0x80 count as token characters so UTF-8 words stay whole.
    static std::vector<std::string> tokenize(std::string_view text) {
        std::vector<std::string> tokens;
        std::string cur;
        for (unsigned char c : text) {
            bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
            if (word) {
                cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c + 32) : static_cast<char>(c);
            } else if (!cur.empty()) {
                tokens.push_back(std::move(cur));
                cur.clear();
            }
        }
        if (!cur.empty()) tokens.push_back(std::move(cur));
        return tokens;
    }

    std::size_t bucket(std::string_view token) const { return fnv1a(token) % dimension_; }

    EmbeddingVector embed(std::string_view text) const override {
        auto tokens = tokenize(text);
        if (tokens.empty()) {
            // punctuation-only text still gets a stable vector
            auto t = text;
            while (!t.empty() && (t.front() == ' ' || t.front() == '\n' || t.front() == '\t')) t.remove_prefix(1);
            while (!t.empty() && (t.back() == ' ' || t.back() == '\n' || t.back() == '\t')) t.remove_suffix(1);
            if (t.empty()) throw Error(ErrorCode::EmptyText, "embed");
            tokens.emplace_back(t);
        }
        EmbeddingVector v{std::vector<double>(dimension_, 0.0)};
        for (const auto& tok : tokens) v.values[bucket(tok)] += 1.0;
        return normalized(std::move(v));
    }

private:
    std::size_t dimension_;
};

}  // namespace schemaflow
