#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "schemaflow/chunking.hpp"
#include "schemaflow/document.hpp"
#include "test_support.hpp"

using namespace schemaflow;

namespace {

json minimal_doc() {
    return json::parse(R"({"doc_id":"d1","chunks":[{"chunk_index":0,"text":"a","page_number":1}],
                           "tables":[],"figures":[],"page_images":[{"page_number":1,"uri":"p1.png"}]})");
}

ErrorCode code_of(const json& raw) {
    try {
        validate_document(raw);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::ContractViolation;
}

}  // namespace

TEST_CASE("minimal document validates") {
    auto d = validate_document(minimal_doc());
    CHECK(d.doc_id == "d1");
    REQUIRE(d.chunks.size() == 1);
    CHECK(d.chunks[0].text == "a");
    CHECK(d.page_images[0].uri == "p1.png");
    CHECK(d.source_uri.empty());
}

TEST_CASE("document errors name the offending path") {
    auto raw = minimal_doc();
    raw["doc_id"] = "";
    try {
        validate_document(raw);
        FAIL("empty doc_id accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingField);
        CHECK(e.path() == "doc_id");
    }

    raw = minimal_doc();
    raw["figures"] = json::array({{{"figure_id", "F1"}, {"page_number", 9}, {"caption", ""},
                                   {"caption_source", "extracted"}, {"is_scientific", false}}});
    try {
        validate_document(raw);
        FAIL("dangling figure page accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::BadReference);
        CHECK(e.path() == "figures[0].page_number");
    }

    raw = minimal_doc();
    raw["tables"] = json::array({{{"table_id", "T"}, {"page_number", 1}, {"caption", ""}, {"cells", {{"a"}}}, {"header_rows", 0}},
                                 {{"table_id", "T"}, {"page_number", 1}, {"caption", ""}, {"cells", {{"b"}}}, {"header_rows", 0}}});
    CHECK(code_of(raw) == ErrorCode::DuplicateId);

    raw = minimal_doc();
    raw["chunks"][0]["text"] = "   \n";
    CHECK(code_of(raw) == ErrorCode::MissingField);

    raw = minimal_doc();
    raw["chunks"][0]["chunk_index"] = 3;
    CHECK(code_of(raw) == ErrorCode::InvalidValue);

    raw = minimal_doc();
    raw["page_images"][0]["uri"] = "";
    CHECK((code_of(raw) == ErrorCode::MissingField || code_of(raw) == ErrorCode::InvalidValue));
}

TEST_CASE("structured figure data only on scientific figures") {
    auto raw = minimal_doc();
    json structured = {{"axes", json::array()}, {"legend", json::array()},
                       {"series", {{{"name", "s"}, {"points", {{1, 2.0}, {{"x", "a"}, {"y", 3.0}}}}}}}};
    raw["figures"] = json::array({{{"figure_id", "F1"}, {"page_number", 1}, {"caption", "c"}, {"caption_source", "generated"},
                                   {"is_scientific", false}, {"structured", structured}}});
    CHECK(code_of(raw) == ErrorCode::InvalidValue);
    raw["figures"][0]["is_scientific"] = true;
    auto d = validate_document(raw);
    REQUIRE(d.figures[0].structured);
    REQUIRE(d.figures[0].structured->series[0].points.size() == 2);
    CHECK(std::get<std::string>(d.figures[0].structured->series[0].points[1].x) == "a");
}

TEST_CASE("ragged table rows are padded") {
    auto raw = minimal_doc();
    raw["tables"] = json::array({{{"table_id", "T"}, {"page_number", 1}, {"caption", ""},
                                  {"cells", {{"a", "b", "c"}, {"d"}}}, {"header_rows", 1}}});
    auto d = validate_document(raw);
    CHECK(d.tables[0].cells[1] == std::vector<std::string>{"d", "", ""});
}

TEST_CASE("serialize then validate is structurally equal") {
    for (const auto& file : {"corpus/paper_a.json", "corpus/paper_b.jsonl"}) {
        for (const auto& loaded : load_documents(test_support::fixture(file))) {
            auto again = validate_document(to_json(loaded.document));
            CHECK(again == loaded.document);
        }
    }
}

TEST_CASE("validate_document is total over mutated inputs") {
    auto base = parse_json_file(test_support::fixture("corpus/paper_a.json"));
    std::mt19937_64 rng(7);
    const std::vector<json> replacements = {nullptr, 0, -1, 3.5, "", "x", json::array(), json::object(), true};
    int errors = 0, ok = 0;
    for (int iter = 0; iter < 2000; ++iter) {
        json doc = base;
        // walk to a random node and replace or delete it
        json* node = &doc;
        std::string last_key;
        json* parent = nullptr;
        for (int depth = 0; depth < 4 && (node->is_object() || node->is_array()) && !node->empty(); ++depth) {
            parent = node;
            std::uniform_int_distribution<std::size_t> pick(0, node->size() - 1);
            auto idx = pick(rng);
            if (node->is_object()) {
                auto it = node->begin();
                std::advance(it, static_cast<long>(idx));
                last_key = it.key();
                node = &(*node)[last_key];
            } else {
                last_key.clear();
                node = &(*node)[idx];
            }
            if (rng() % 3 == 0) break;
        }
        if (parent && parent->is_object() && rng() % 4 == 0) parent->erase(last_key);
        else *node = replacements[rng() % replacements.size()];
        try {
            validate_document(doc);
            ++ok;
        } catch (const Error&) {
            ++errors;
        }
    }
    CHECK(errors + ok == 2000);
    CHECK(errors > 0);
}

TEST_CASE("chunk_text basic cases") {
    CHECK(chunk_text("", 500, 0).empty());
    std::string hundred(100, 'x');
    auto one = chunk_text(hundred, 500, 0);
    REQUIRE(one.size() == 1);
    CHECK(one[0].text == hundred);
    CHECK_THROWS_AS(chunk_text("abc", 10, 10), Error);
}

TEST_CASE("two paragraphs split at the blank line") {
    std::string p1, p2;
    for (int i = 0; i < 30; ++i) p1 += "Aaaaaaaaa ";  // 300 chars
    for (int i = 0; i < 30; ++i) p2 += "Bbbbbbbbb ";
    REQUIRE(p1.size() == 300);
    std::string text = p1 + "\n\n" + p2;
    auto chunks = chunk_text(text, 350, 0);
    REQUIRE(chunks.size() == 2);
    // the first chunk ends right after the blank line; the second holds the rest
    CHECK(chunks[0].text == p1 + "\n\n");
    CHECK(chunks[1].text == p2);
}

TEST_CASE("sentence boundary used when no paragraph break fits") {
    std::string text = "First sentence here. Second sentence is a bit longer than the first one.";
    auto chunks = chunk_text(text, 30, 0);
    REQUIRE(chunks.size() >= 2);
    CHECK(chunks[0].text == "First sentence here. ");
}

TEST_CASE("chunk reconstruction property") {
    std::mt19937_64 rng(11);
    const std::vector<std::string> pieces = {"word ", "Sentence ends. ", "\n\n", "é", "x", "Why? ", "  ", "long-token-without-breaks"};
    for (int iter = 0; iter < 300; ++iter) {
        std::string text;
        auto n = rng() % 80;
        for (std::size_t i = 0; i < n; ++i) text += pieces[rng() % pieces.size()];
        std::size_t max_chars = 8 + rng() % 120;
        std::size_t overlap = rng() % max_chars;
        auto chunks = chunk_text(text, max_chars, overlap);
        std::string rebuilt;
        std::size_t prev_len = 0;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            const auto& c = chunks[i].text;
            REQUIRE(c.size() <= max_chars);
            CHECK(chunks[i].chunk_index == static_cast<std::int64_t>(i));
            std::size_t skip = i == 0 ? 0 : std::min(overlap, prev_len);
            REQUIRE(skip < c.size());
            rebuilt += c.substr(skip);
            prev_len = c.size();
        }
        REQUIRE(rebuilt == text);
    }
}

TEST_CASE("load_documents reads json and json-lines") {
    auto a = load_documents(test_support::fixture("corpus/paper_a.json"));
    auto b = load_documents(test_support::fixture("corpus/paper_b.jsonl"));
    REQUIRE(a.size() == 1);
    REQUIRE(b.size() == 1);
    CHECK(a[0].document.doc_id == "paper_a");
    CHECK(b[0].document.doc_id == "paper_b");
    CHECK(a[0].document.figures.size() == 2);
    CHECK_THROWS_AS(load_documents(test_support::fixture("does_not_exist.json")), Error);
}
