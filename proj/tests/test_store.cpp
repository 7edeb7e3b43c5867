#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <fstream>

#include "oracles.hpp"
#include "schemaflow/store.hpp"
#include "test_support.hpp"

using namespace schemaflow;

TEST_CASE("hashing embedder matches hand-computed buckets") {
    HashingEmbedder emb(256);
    auto v = emb.embed("virus virus decay");
    auto bv = oracle::fnv1a64("virus") % 256;
    auto bd = oracle::fnv1a64("decay") % 256;
    REQUIRE(bv != bd);
    // counts (2, 1) normalized by sqrt(5)
    CHECK(v.values[bv] == Catch::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-12));
    CHECK(v.values[bd] == Catch::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-12));
    double rest = 0.0;
    for (std::size_t i = 0; i < 256; ++i)
        if (i != bv && i != bd) rest += std::fabs(v.values[i]);
    CHECK(rest == 0.0);
    CHECK(emb.embed("Virus, VIRUS; decay!") == v);
}

TEST_CASE("embedder edge cases") {
    HashingEmbedder emb;
    CHECK_THROWS_MATCHES(emb.embed("   "), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == ErrorCode::EmptyText;
                         }));
    auto p = emb.embed("?!");
    CHECK(std::fabs(l2_norm(p) - 1.0) < 1e-12);
    CHECK(emb.embed("?!") == p);
    CHECK(emb.tag() == "hashing-fnv1a-256");
}

TEST_CASE("table and figure surrogates") {
    auto doc = load_documents(test_support::fixture("corpus/paper_a.json")).front().document;
    auto table = linearize_table(doc.tables[0]);
    CHECK(table.find("Table 1. First-order decay rates on stainless steel.") == 0);
    CHECK(table.find("Virus: MS2 | Temperature (C): 25 | RH (%): 50 | Decay rate (1/h): 0.12") != std::string::npos);
    auto fig = summarize_figure(doc.figures[0]);
    CHECK(fig.find("Figure 1. Log titer over time.") == 0);
    CHECK(fig.find("MS2") != std::string::npos);
}

TEST_CASE("build_entries covers every chunk, table, and figure") {
    HashingEmbedder emb;
    auto doc = load_documents(test_support::fixture("corpus/paper_a.json")).front().document;
    auto entries = build_entries(doc, emb);
    CHECK(entries.size() == doc.chunks.size() + doc.tables.size() + doc.figures.size());
    VectorStore store(emb);
    CHECK(store.index(entries) == 6);
    REQUIRE(store.find("paper_a#text:0"));
    REQUIRE(store.find("paper_a#table:T1"));
    REQUIRE(store.find("paper_a#figure:F2"));
    CHECK(store.find("paper_a#table:T1")->modality == Modality::Table);
}

TEST_CASE("index rejects bad batches atomically") {
    HashingEmbedder emb(8);
    VectorStore store(emb);
    StoreEntry a{"a", "d", Modality::Text, std::int64_t{0}, "x", emb.embed("alpha")};
    StoreEntry b{"b", "d", Modality::Text, std::int64_t{1}, "y", emb.embed("beta")};
    store.index({a});
    try {
        store.index({b, a});
        FAIL("duplicate accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DuplicateEntryId);
    }
    CHECK(store.size() == 1);

    StoreEntry wrong_dim = b;
    wrong_dim.vector.values.push_back(0.0);
    CHECK_THROWS_AS(store.index({wrong_dim}), Error);
    StoreEntry unnormalized = b;
    unnormalized.vector.values[0] += 1.0;
    CHECK_THROWS_AS(store.index({unnormalized}), Error);
    CHECK(store.size() == 1);

    HashingEmbedder other(16);
    try {
        store.query("alpha", other, 1);
        FAIL("embedder mismatch accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmbedderMismatch);
    }
    CHECK_THROWS_AS(store.query("  ", emb, 1), Error);
}

TEST_CASE("query equals brute-force ranking") {
    std::mt19937_64 rng(2024);
    for (int iter = 0; iter < 40; ++iter) {
        const std::size_t dim = 4 + rng() % 12;
        const std::size_t n = 1 + rng() % 500;
        auto entries = oracle::random_entries(rng, n, dim);
        VectorStore store(dim, "test");
        store.index(entries);
        for (std::size_t k : {1u, 5u, 20u}) {
            auto q = oracle::quantized_unit_vector(rng, dim);
            auto got = store.query(q, k);
            auto want = oracle::brute_force_top_k(entries, q, k);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) REQUIRE(got[i].entry_id == want[i]);
        }
    }
}

TEST_CASE("query filters by document and modality") {
    std::mt19937_64 rng(5);
    auto entries = oracle::random_entries(rng, 300, 8);
    VectorStore store(8, "test");
    store.index(entries);
    auto q = oracle::quantized_unit_vector(rng, 8);
    QueryFilter f{"d1", Modality::Table};
    std::vector<StoreEntry> subset;
    for (const auto& e : entries)
        if (e.doc_id == "d1" && e.modality == Modality::Table) subset.push_back(e);
    auto got = store.query(q, 10, f);
    auto want = oracle::brute_force_top_k(subset, q, 10);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].entry_id == want[i]);
}

TEST_CASE("persist and load round-trip") {
    test_support::TempDir tmp;
    HashingEmbedder emb;
    auto doc = load_documents(test_support::fixture("corpus/paper_a.json")).front().document;
    VectorStore store(emb);
    store.index(build_entries(doc, emb));
    store.persist(tmp / "s.bin");
    auto loaded = VectorStore::load(tmp / "s.bin");
    CHECK(loaded.entries() == store.entries());
    CHECK(loaded.embedder_tag() == store.embedder_tag());
    CHECK(loaded.query("MS2 decay", emb, 3) == store.query("MS2 decay", emb, 3));

    auto bytes = read_file(tmp / "s.bin");
    auto bad_version = bytes;
    bad_version[4] = 9;
    write_file(tmp / "v.bin", bad_version);
    try {
        VectorStore::load(tmp / "v.bin");
        FAIL("version mismatch accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::FormatVersionMismatch);
    }
    write_file(tmp / "t.bin", bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(VectorStore::load(tmp / "t.bin"), Error);
    CHECK_THROWS_AS(VectorStore::load(tmp / "missing.bin"), Error);
}

TEST_CASE("single query at 10k entries stays under 50 ms") {
    std::mt19937_64 rng(99);
    HashingEmbedder emb;
    auto entries = oracle::random_entries(rng, 10000, emb.dimension());
    VectorStore store(emb.dimension(), emb.tag());
    store.index(std::move(entries));
    auto q = emb.embed("MS2 decay at 25 C");
    store.query(q, 20);  // warm caches
    auto start = std::chrono::steady_clock::now();
    auto hits = store.query(q, 20);
    auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    CHECK(hits.size() == 20);
    CHECK(ms < 50.0);
}
