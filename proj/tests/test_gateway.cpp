#include <catch2/catch_amalgamated.hpp>

#include "schemaflow/gateway.hpp"
#include "schemaflow/schema_generation.hpp"
#include "test_support.hpp"

using namespace schemaflow;
using namespace std::chrono_literals;

namespace {

PromptRequest request(const std::string& user, const std::string& profile = "p") {
    PromptRequest r;
    r.model_profile = profile;
    r.system = "sys";
    r.user = user;
    return r;
}

ProfileConfig profile(const std::string& name = "p", int retries = 3) {
    ProfileConfig p;
    p.name = name;
    p.max_retries = retries;
    p.backoff_base = 100ms;
    p.backoff_max = 350ms;
    return p;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::ContractViolation;
}

/// Backend that counts calls and fails the first `failures` of them.
class FlakyBackend : public Backend {
public:
    FlakyBackend(int failures, ErrorCode code) : failures_(failures), code_(code) {}
    CompletionResponse send(const PromptRequest&, const ProfileConfig&) override {
        if (calls++ < failures_) throw Error(code_, "flaky");
        return {"ok", "", {3, 1}, 0};
    }
    int calls = 0;

private:
    int failures_;
    ErrorCode code_;
};

}  // namespace

TEST_CASE("fingerprint depends on every prompt component") {
    auto a = request("hello");
    auto base = fingerprint(a);
    CHECK(base.size() == 64);
    CHECK(fingerprint(a) == base);
    auto b = a;
    b.system = "other";
    CHECK(fingerprint(b) != base);
    b = a;
    b.user = "hello!";
    CHECK(fingerprint(b) != base);
    b = a;
    b.attachments.push_back({AttachmentKind::ImageUri, "p1.png"});
    auto with_image = fingerprint(b);
    CHECK(with_image != base);
    b.attachments[0].kind = AttachmentKind::TableText;
    CHECK(fingerprint(b) != with_image);
    // the routing profile and sampling settings are not part of the content
    b = a;
    b.model_profile = "q";
    b.temperature = 0.5;
    CHECK(fingerprint(b) == base);
}

TEST_CASE("mock backend replays by fingerprint, then by match rule") {
    auto mock = std::make_shared<MockBackend>();
    auto req = request("exact prompt");
    mock->add_response(fingerprint(req), "by-fingerprint");
    MockEntry rule;
    rule.user_contains = {"Round: 1", "doc"};
    rule.responses = {"first", "second"};
    mock->add(rule);

    Gateway gw;
    gw.add_profile(profile(), mock);
    CHECK(gw.complete(req).text == "by-fingerprint");
    CHECK(gw.complete(request("doc x Round: 1")).text == "first");
    CHECK(gw.complete(request("Round: 1 doc y")).text == "second");
    CHECK(gw.complete(request("doc z Round: 1")).text == "second");  // last response repeats

    CHECK(code_of([&] { gw.complete(request("doc Round: 2")); }) == ErrorCode::MockUnmatched);
    REQUIRE(mock->misses().size() == 1);
    CHECK(mock->misses()[0].user == "doc Round: 2");
}

TEST_CASE("mock scripts load from JSON and reject malformed entries") {
    auto mock = MockBackend::from_json(json::parse(R"([
        {"match": {"user_contains": "alpha"}, "response_text": "A"},
        {"match": {"user_contains": ["be", "ta"]}, "responses": ["B1", "B2"], "fail_first": 1, "failure": "rate_limited"}
    ])"));
    Gateway gw;
    gw.set_sleeper([](auto) {});
    gw.add_profile(profile(), mock);
    CHECK(gw.complete(request("alpha")).text == "A");
    CHECK(gw.complete(request("beta")).text == "B1");
    CHECK(gw.audit().back().retry_count == 1);

    CHECK(code_of([] { MockBackend::from_json(json::parse(R"([{"response_text":"x"}])")); }) == ErrorCode::ConfigError);
    CHECK(code_of([] { MockBackend::from_json(json::parse(R"([{"match":{"user_contains":"a"}}])")); }) ==
          ErrorCode::ConfigError);
    CHECK(code_of([] {
              MockBackend::from_json(json::parse(R"([{"match":{"user_contains":"a"},"response_text":"x","failure":"boom"}])"));
          }) == ErrorCode::ConfigError);
}

TEST_CASE("transient failures retry with capped exponential backoff") {
    auto flaky = std::make_shared<FlakyBackend>(3, ErrorCode::ServiceUnavailable);
    Gateway gw;
    std::vector<std::int64_t> slept;
    gw.set_sleeper([&](std::chrono::milliseconds d) { slept.push_back(d.count()); });
    gw.add_profile(profile("p", 3), flaky);
    auto resp = gw.complete(request("x"));
    CHECK(resp.text == "ok");
    CHECK(resp.model_profile == "p");
    CHECK(flaky->calls == 4);
    // base 100 doubling, capped at 350
    CHECK(slept == std::vector<std::int64_t>{100, 200, 350});
    auto audit = gw.audit();
    REQUIRE(audit.size() == 1);
    CHECK(audit[0].retry_count == 3);
    CHECK(audit[0].backoff_ms == slept);
    CHECK(audit[0].outcome == "ok");
    CHECK(audit[0].response_digest == sha256_hex("ok"));
    CHECK(audit[0].usage.input_tokens == 3);
}

TEST_CASE("retries stop at the budget and non-transient errors are not retried") {
    Gateway gw;
    gw.set_sleeper([](auto) {});
    auto down = std::make_shared<FlakyBackend>(100, ErrorCode::Timeout);
    gw.add_profile(profile("down", 2), down);
    CHECK(code_of([&] { gw.complete(request("x", "down")); }) == ErrorCode::Timeout);
    CHECK(down->calls == 3);
    CHECK(gw.audit().back().outcome == "Timeout");

    auto auth = std::make_shared<FlakyBackend>(100, ErrorCode::AuthFailure);
    gw.add_profile(profile("auth", 5), auth);
    CHECK(code_of([&] { gw.complete(request("x", "auth")); }) == ErrorCode::AuthFailure);
    CHECK(auth->calls == 1);

    CHECK(code_of([&] { gw.complete(request("x", "nope")); }) == ErrorCode::ProfileUnknown);
    CHECK_THROWS_AS(gw.complete(request("", "auth")), Error);
    auto audit = gw.audit();
    for (std::size_t i = 0; i < audit.size(); ++i) CHECK(audit[i].seq == i + 1);
}

TEST_CASE("extract_json finds JSON in chatty output") {
    CHECK(extract_json(R"({"a":1})") == json{{"a", 1}});
    CHECK(extract_json("Sure!\n```json\n[1, 2]\n```\nDone.") == json::array({1, 2}));
    CHECK(extract_json(R"(The answer is {"s": "a } brace"} as requested.)") == json{{"s", "a } brace"}});
    CHECK_FALSE(extract_json("no json here"));
    CHECK_FALSE(extract_json("{broken"));
}

TEST_CASE("structured completion repairs, then gives up") {
    auto schema = parse_schema(parse_json_file(test_support::fixture("schema.json")));
    auto target = record_target(schema);

    auto mock = std::make_shared<MockBackend>();
    MockEntry fixable;
    fixable.user_contains = {"fixable"};
    fixable.responses = {"not json at all", R"({"virus":"HIV"})", R"({"virus":"ms2","temperature":"25 C"})"};
    mock->add(fixable);
    MockEntry hopeless;
    hopeless.user_contains = {"hopeless"};
    hopeless.responses = {R"({"colour":"red"})"};
    mock->add(hopeless);

    Gateway gw;
    gw.add_profile(profile(), mock);
    auto r = gw.complete_structured(request("fixable"), target, 2);
    CHECK(r.repair_count == 2);
    CHECK(r.value == json{{"virus", "MS2"}, {"temperature", 25.0}});

    CHECK(code_of([&] { gw.complete_structured(request("hopeless"), target, 2); }) ==
          ErrorCode::StructureInvalidAfterRepair);
    // one initial call plus two repairs for each request
    CHECK(gw.audit().size() == 6);
}

TEST_CASE("shape targets check nested structure") {
    auto t = shape_target(json::parse(
        R"({"type":"object","required":["mappings"],"properties":{"mappings":{"type":"object"},"n":{"type":"integer"}}})"));
    CHECK(t.validate(json{{"mappings", json::object()}}) == json{{"mappings", json::object()}});
    CHECK_THROWS_AS(t.validate(json{{"n", 1}}), Error);
    CHECK_THROWS_AS(t.validate(json{{"mappings", json::object()}, {"n", 1.5}}), Error);
}

TEST_CASE("schema generation parses, repairs once, and reports failure") {
    auto good = parse_json_file(test_support::fixture("schema.json"));
    auto mock = std::make_shared<MockBackend>();
    MockEntry e;
    e.user_contains = {"Request: decay"};
    e.responses = {R"({"fields":[{"name":"x","dtype":"categorical","is_key":true}]})", good.dump()};
    mock->add(e);
    MockEntry bad;
    bad.user_contains = {"Request: nonsense"};
    bad.responses = {"I cannot help with that."};
    mock->add(bad);
    MockEntry multi;
    multi.user_contains = {"Request: several"};
    multi.responses = {json::array({good, good}).dump()};
    mock->add(multi);

    Gateway gw;
    gw.add_profile(profile(), mock);
    auto g = generate_schema("decay of viruses on surfaces", gw, "p");
    CHECK(g.repairs == 1);
    CHECK(g.raw_outputs.size() == 2);
    CHECK(g.schema == parse_schema(good));

    CHECK(code_of([&] { generate_schema("nonsense", gw, "p"); }) == ErrorCode::SchemaInvalidAfterRepair);

    auto m = generate_schema("several", gw, "p");
    CHECK(m.repairs == 0);
    CHECK(m.alternates.size() == 1);
    CHECK_THROWS_AS(generate_schema("  ", gw, "p"), Error);
}
