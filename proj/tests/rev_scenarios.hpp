#pragma once

// Scripted mock scenarios for the extraction loop, shared by the unit tests
// and the acceptance binary. Expected traces are written by hand from the
// scripted responses.

#include <memory>
#include <sstream>

#include "schemaflow/rev.hpp"
#include "test_support.hpp"

namespace rev_scenarios {

using namespace schemaflow;
using Pending = std::map<std::string, std::vector<std::string>>;

struct ExpectedRound {
    int round;
    Pending pending;
    std::size_t gateway_calls;
    int records_after;
    bool complete;
};

struct Harness {
    Schema schema = parse_schema(parse_json_file(test_support::fixture("schema.json")));
    HashingEmbedder embedder;
    VectorStore store{embedder};
    std::shared_ptr<MockBackend> mock = std::make_shared<MockBackend>();
    Gateway gateway;
    RevConfig config;

    Harness() {
        ProfileConfig p;
        p.name = config.profile;
        gateway.add_profile(p, mock);
        gateway.set_sleeper([](auto) {});
    }

    Document load(const std::string& file) {
        auto doc = load_documents(test_support::fixture(file)).front().document;
        store.index(build_entries(doc, embedder));
        return doc;
    }

    void script(const std::string& doc_id, int round, json rows) {
        MockEntry e;
        e.user_contains = {"Document: " + doc_id + "\n", "Round: " + std::to_string(round) + "\n"};
        e.responses = {json{{"rows", std::move(rows)}}.dump()};
        mock->add(std::move(e));
    }

    RevRun run(const Document& doc) { return schemaflow::run(doc, schema, store, embedder, gateway, config); }
};

inline json cell(json value, double confidence, const std::string& cite, const std::optional<std::string>& unit = {}) {
    json c = {{"value", std::move(value)}, {"confidence", confidence}, {"evidence", json::array({cite})}};
    if (unit) c["unit"] = *unit;
    return c;
}

inline const std::vector<std::string>& all_fields() {
    static const std::vector<std::string> f = {"virus", "temperature", "humidity", "decay_rate", "surface"};
    return f;
}

/// Empty when the audit matches `want` round for round; otherwise a
/// description of the first difference.
inline std::string trace_mismatch(const RevRun& run, const std::vector<ExpectedRound>& want) {
    std::ostringstream why;
    if (run.audit.size() != want.size()) {
        why << "rounds: got " << run.audit.size() << ", want " << want.size();
        return why.str();
    }
    for (std::size_t i = 0; i < want.size(); ++i) {
        const auto& got = run.audit[i];
        std::size_t queries = 0;
        for (const auto& [id, fields] : got.pending) queries += fields.size();
        if (got.round != want[i].round) why << "round number; ";
        if (got.pending != want[i].pending) why << "pending set; ";
        if (got.gateway_fingerprints.size() != want[i].gateway_calls) why << "gateway calls; ";
        if (got.records_after != want[i].records_after) why << "record count; ";
        if (got.complete != want[i].complete) why << "completeness; ";
        if (!std::is_sorted(got.retrieved.begin(), got.retrieved.end())) why << "retrieved order; ";
        if (got.queries.size() != queries) why << "query count; ";
        if (!why.str().empty()) return "round " + std::to_string(i + 1) + ": " + why.str();
    }
    return "";
}

struct Scenario {
    std::unique_ptr<Harness> harness;
    RevRun run;
    std::vector<ExpectedRound> want;
};

/// paper_a: every field found in round one.
inline Scenario converge_round_one() {
    Scenario s{std::make_unique<Harness>(), {}, {}};
    auto& h = *s.harness;
    auto doc = h.load("corpus/paper_a.json");
    h.script("paper_a", 1,
             {{{"virus", cell("MS2", 0.95, "paper_a#table:T1")},
               {"temperature", cell(25, 0.95, "paper_a#table:T1", "C")},
               {"humidity", cell(50, 0.9, "paper_a#table:T1", "%")},
               {"decay_rate", cell(0.12, 0.9, "paper_a#table:T1")}}});
    s.run = h.run(doc);
    s.want = {{1, {{"*", all_fields()}}, 1, 1, true}};
    return s;
}

/// paper_b: the 4 C row lacks humidity after round one and gets it from an
/// anchored follow-up in round two.
inline Scenario fill_round_two() {
    Scenario s{std::make_unique<Harness>(), {}, {}};
    auto& h = *s.harness;
    auto doc = h.load("corpus/paper_b.jsonl");
    h.script("paper_b", 1,
             {{{"virus", cell("MS2", 0.95, "paper_b#table:T2")},
               {"temperature", cell("77 F", 0.95, "paper_b#table:T2")},
               {"humidity", cell(50, 0.9, "paper_b#text:0")}},
              {{"virus", cell("MS2", 0.95, "paper_b#table:T2")},
               {"temperature", cell("4 C", 0.95, "paper_b#table:T2")},
               {"humidity", {{"value", nullptr}}}}});
    h.script("paper_b", 2,
             {{{"virus", cell("MS2", 0.95, "paper_b#text:0")},
               {"temperature", cell(4, 0.95, "paper_b#text:0", "C")},
               {"humidity", cell(60, 0.9, "paper_b#text:0", "%")}}});
    s.run = h.run(doc);
    s.want = {{1, {{"*", all_fields()}}, 1, 2, false}, {2, {{"paper_b/r2", {"humidity"}}}, 1, 2, true}};
    return s;
}

/// paper_b: humidity is never reported; the loop stops after three rounds.
inline Scenario exhaust_round_limit() {
    Scenario s{std::make_unique<Harness>(), {}, {}};
    auto& h = *s.harness;
    h.config.max_rounds = 3;
    auto doc = h.load("corpus/paper_b.jsonl");
    json row = {{"virus", cell("MS2", 0.95, "paper_b#table:T2")},
                {"temperature", cell(4, 0.95, "paper_b#table:T2", "C")},
                {"humidity", {{"value", nullptr}}}};
    h.script("paper_b", 1, {row});
    h.script("paper_b", 2, {row});
    h.script("paper_b", 3, json::array());
    s.run = h.run(doc);
    const Pending humid = {{"paper_b/r1", {"humidity"}}};
    s.want = {{1, {{"*", all_fields()}}, 1, 1, false}, {2, humid, 1, 1, false}, {3, humid, 1, 1, false}};
    return s;
}

}  // namespace rev_scenarios
