#pragma once

// Slow, obviously-correct reference implementations the tests compare the
// library against.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "schemaflow/eval.hpp"
#include "schemaflow/store.hpp"

namespace oracle {

/// Full sort of every entry by (score desc, entry_id asc), then the first k.
inline std::vector<std::string> brute_force_top_k(const std::vector<schemaflow::StoreEntry>& entries,
                                                  const schemaflow::EmbeddingVector& q, std::size_t k) {
    std::vector<std::pair<double, std::string>> all;
    for (const auto& e : entries) {
        double s = 0.0;
        for (std::size_t i = 0; i < q.values.size(); ++i) s += q.values[i] * e.vector.values[i];
        all.emplace_back(std::clamp(s, -1.0, 1.0), e.entry_id);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) ids.push_back(all[i].second);
    return ids;
}

/// Unit vector with small-integer components, so exact score ties are common.
inline schemaflow::EmbeddingVector quantized_unit_vector(std::mt19937_64& rng, std::size_t dim) {
    std::uniform_int_distribution<int> comp(-2, 2);
    schemaflow::EmbeddingVector v{std::vector<double>(dim)};
    do {
        for (auto& x : v.values) x = comp(rng);
    } while (schemaflow::l2_norm(v) == 0.0);
    return schemaflow::normalized(v);
}

inline std::vector<schemaflow::StoreEntry> random_entries(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
    std::vector<schemaflow::StoreEntry> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        schemaflow::StoreEntry e;
        e.doc_id = "d" + std::to_string(rng() % 4);
        e.modality = static_cast<schemaflow::Modality>(rng() % 3);
        e.ref = static_cast<std::int64_t>(i);
        e.entry_id = "e" + std::to_string(rng() % 1000000) + "_" + std::to_string(i);
        e.text_surrogate = e.entry_id;
        // every fifth entry duplicates an earlier vector to force ties
        if (i >= 5 && i % 5 == 0) e.vector = out[rng() % i].vector;
        else e.vector = quantized_unit_vector(rng, dim);
        out.push_back(std::move(e));
    }
    return out;
}

/// Best total weight over every injective partial assignment of rows to
/// columns, by depth-first enumeration.
inline double exhaustive_max_weight(const schemaflow::WeightMatrix& w, std::size_t m) {
    std::vector<char> used(m, 0);
    double best = 0.0;
    auto rec = [&](auto&& self, std::size_t i, double acc) -> void {
        if (i == w.size()) {
            best = std::max(best, acc);
            return;
        }
        self(self, i + 1, acc);  // row i left unmatched
        for (std::size_t j = 0; j < m; ++j) {
            if (used[j] || !w[i][j]) continue;
            used[j] = 1;
            self(self, i + 1, acc + *w[i][j]);
            used[j] = 0;
        }
    };
    rec(rec, 0, 0.0);
    return best;
}

/// Random similarity matrix with values that are means of 0/1 over a few
/// key fields (so equal-weight optima are frequent) and missing edges.
inline schemaflow::WeightMatrix random_weights(std::mt19937_64& rng, std::size_t n, std::size_t m) {
    schemaflow::WeightMatrix w(n, std::vector<std::optional<double>>(m));
    const int keys = 1 + static_cast<int>(rng() % 3);
    for (auto& row : w)
        for (auto& cell : row) {
            int matches = static_cast<int>(rng() % (keys + 1));
            double s = static_cast<double>(matches) / keys;
            if (s >= 0.5) cell = s;
        }
    return w;
}

/// 64-bit FNV-1a, written out independently of the library.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Random valid schema JSON: unique names, at least one key, categorical
/// fields with a non-empty vocabulary.
inline schemaflow::json random_schema_json(std::mt19937_64& rng) {
    using schemaflow::json;
    static const std::vector<std::string> bases = {"string", "float", "integer", "boolean", "categorical"};
    static const std::vector<std::string> units = {"C", "mL", "h", "m", "%"};
    json fields = json::array();
    const std::size_t n = 1 + rng() % 8;
    std::size_t key_index = rng() % n;
    for (std::size_t i = 0; i < n; ++i) {
        std::string base = bases[rng() % bases.size()];
        bool list = rng() % 4 == 0;
        json f = {{"name", "field_" + std::to_string(i) + "_" + std::to_string(rng() % 100)},
                  {"dtype", list ? "list_of(" + base + ")" : base},
                  {"required", rng() % 2 == 0},
                  {"is_key", i == key_index || rng() % 5 == 0}};
        if (base == "categorical") {
            json vocab = json::array();
            std::size_t terms = 1 + rng() % 4;
            for (std::size_t t = 0; t < terms; ++t) vocab.push_back("term" + std::to_string(t));
            f["vocabulary"] = vocab;
        }
        if ((base == "float" || base == "integer") && rng() % 2 == 0) f["unit"] = units[rng() % units.size()];
        if ((base == "float" || base == "integer") && rng() % 3 == 0) {
            double lo = static_cast<double>(rng() % 50);
            f["range"] = {{"min", lo}, {"max", lo + static_cast<double>(rng() % 100)}};
        }
        if (rng() % 2 == 0) f["description"] = "desc " + std::to_string(i);
        fields.push_back(f);
    }
    json out = {{"fields", fields}};
    if (rng() % 2 == 0) out["schema_id"] = "schema_" + std::to_string(rng() % 1000);
    if (rng() % 2 == 0) out["description"] = "random schema";
    return out;
}

}  // namespace oracle
