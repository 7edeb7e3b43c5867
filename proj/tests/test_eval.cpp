#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "schemaflow/eval.hpp"
#include "test_support.hpp"

using namespace schemaflow;

namespace {

Schema fixture_schema() { return parse_schema(parse_json_file(test_support::fixture("schema.json"))); }

MatchConfig config_for(const Schema& s) { return MatchConfig{}.resolved(s); }

EvalRow row(const std::string& virus, double temperature, double humidity = 50.0) {
    return {{"virus", virus}, {"temperature", temperature}, {"humidity", humidity}, {"decay_rate", nullptr}, {"surface", nullptr}};
}

/// Lexicographically smallest optimal assignment (unmatched = m, sorting last),
/// found by enumerating every injective partial assignment.
std::vector<std::size_t> exhaustive_tie_break(const WeightMatrix& w, std::size_t m) {
    const double best = oracle::exhaustive_max_weight(w, m);
    std::vector<std::size_t> cur(w.size()), chosen;
    std::vector<char> used(m, 0);
    auto rec = [&](auto&& self, std::size_t i, double acc) -> void {
        if (i == w.size()) {
            if (std::fabs(acc - best) <= 1e-9 * std::max(1.0, best) && (chosen.empty() || cur < chosen)) chosen = cur;
            return;
        }
        for (std::size_t j = 0; j < m; ++j) {
            if (used[j] || !w[i][j]) continue;
            used[j] = 1;
            cur[i] = j;
            self(self, i + 1, acc + *w[i][j]);
            used[j] = 0;
        }
        cur[i] = m;
        self(self, i + 1, acc);
    };
    rec(rec, 0, 0.0);
    return chosen;
}

std::filesystem::path write_temp(const std::string& name, const std::string& body) {
    auto p = std::filesystem::temp_directory_path() / ("schemaflow_eval_" + name);
    std::ofstream(p, std::ios::binary) << body;
    return p;
}

}  // namespace

TEST_CASE("field similarity follows the tolerance formula") {
    auto s = fixture_schema();
    auto cfg = config_for(s);
    const auto& temp = *s.find("temperature");
    CHECK(field_similarity(25.0, 25.0, temp, cfg) == 1.0);
    // |24 - 25| = 1 <= 0.05 * 25 = 1.25
    CHECK(field_similarity(24.0, 25.0, temp, cfg) == 1.0);
    // |23.7 - 25| = 1.3 > 1.25
    CHECK(field_similarity(23.7, 25.0, temp, cfg) == 0.0);
    // tolerance is taken relative to the ground-truth side
    CHECK(field_similarity(1.0, 1.04, temp, cfg) == 1.0);
    CHECK(field_similarity(0.0, 0.0, temp, cfg) == 1.0);
    CHECK(field_similarity(5e-7, 0.0, temp, cfg) == 1.0);
    CHECK(field_similarity(nullptr, nullptr, temp, cfg) == 1.0);
    CHECK(field_similarity(nullptr, 25.0, temp, cfg) == 0.0);

    const auto& virus = *s.find("virus");
    CHECK(field_similarity("MS2 ", "ms2", virus, cfg) == 1.0);
    cfg.string_normalizer = StringNormalizer::Exact;
    CHECK(field_similarity("MS2 ", "ms2", virus, cfg) == 0.0);
    cfg.string_normalizer = StringNormalizer::Canonicalized;
    cfg.canon_map = CanonMap::from_json(json::parse(R"({"entries":{"bacteriophage MS2":"MS2"}})"));
    CHECK(field_similarity("bacteriophage MS2", "MS2", virus, cfg) == 1.0);

    CHECK(field_similarity(json::array({2.0, 1.0}), json::array({1.0, 2.0}), temp, cfg) == 1.0);
    CHECK(field_similarity(json::array({1.0}), json::array({1.0, 2.0}), temp, cfg) == 0.0);
}

TEST_CASE("candidates use mean key similarity with an inclusive threshold") {
    auto s = fixture_schema();
    auto cfg = config_for(s);
    std::vector<EvalRow> ext = {row("Phi6", 4.0), row("MS2", 25.0), row("MS2", 4.0)};
    auto c = candidate_matches(row("MS2", 25.0), ext, s, cfg);
    REQUIRE(c.size() == 2);
    CHECK(c[0].ext_index == 1);
    CHECK(c[0].key_similarity == 1.0);
    CHECK(c[1].ext_index == 2);
    CHECK(c[1].key_similarity == 0.5);
    cfg.candidate_threshold = 0.51;
    CHECK(candidate_matches(row("MS2", 25.0), ext, s, cfg).size() == 1);
}

TEST_CASE("one extracted row similar to two truth rows goes to the stronger one") {
    WeightMatrix w = {{0.9}, {0.8}};
    auto r = max_weight_matching(w, 1);
    REQUIRE(r.pairs.size() == 1);
    CHECK(r.pairs[0] == MatchPair{0, 0, 0.9});
    CHECK(r.unmatched_gt == std::vector<std::size_t>{1});
    CHECK(r.unmatched_ext.empty());
}

TEST_CASE("optimal matching agrees with exhaustive enumeration") {
    std::mt19937_64 rng(1000);
    auto start = std::chrono::steady_clock::now();
    int agree = 0;
    const int instances = 1200;
    for (int t = 0; t < instances; ++t) {
        std::size_t n = rng() % 8, m = rng() % 8;
        auto w = oracle::random_weights(rng, n, m);
        auto r = max_weight_matching(w, m);
        double want = oracle::exhaustive_max_weight(w, m);
        bool ok = std::fabs(r.total_weight() - want) <= 1e-9;

        std::set<std::size_t> gts, exts;
        for (const auto& p : r.pairs) {
            ok = ok && gts.insert(p.gt_index).second && exts.insert(p.ext_index).second;
            ok = ok && w[p.gt_index][p.ext_index] && *w[p.gt_index][p.ext_index] == p.similarity;
        }
        ok = ok && gts.size() + r.unmatched_gt.size() == n && exts.size() + r.unmatched_ext.size() == m;

        // deterministic tie-break: smallest assignment vector among optima
        std::vector<std::size_t> got(n, m);
        for (const auto& p : r.pairs) got[p.gt_index] = p.ext_index;
        if (n > 0) ok = ok && got == exhaustive_tie_break(w, m);
        agree += ok ? 1 : 0;
        CAPTURE(t, n, m);
        CHECK(ok);
    }
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(agree == instances);
    CHECK(secs < 10.0);
}

TEST_CASE("metric arithmetic from counts") {
    auto s = fixture_schema();
    auto cfg = config_for(s);
    // 4 truth rows, 5 extracted rows, exactly 2 share a key tuple
    std::vector<EvalRow> gt = {row("MS2", 25), row("MS2", 4), row("Phi6", 37), row("Phi6", 25)};
    std::vector<EvalRow> ext = {row("MS2", 25), row("Phi6", 37), row("SARS-CoV-2", 4),
                                row("SARS-CoV-2", 10), row("SARS-CoV-2", 60)};
    cfg.candidate_threshold = 1.0;
    auto match = bipartite_match(gt, ext, s, cfg);
    auto m = compute_metrics(match, gt, ext, s, cfg);
    CHECK(m.n_gt == 4);
    CHECK(m.n_ext == 5);
    CHECK(m.n_matched == 2);
    const double p = 2.0 / 5.0, r = 2.0 / 4.0;
    CHECK(std::fabs(m.precision - 0.4) <= 1e-9);
    CHECK(std::fabs(m.recall - 0.5) <= 1e-9);
    CHECK(std::fabs(m.f1 - 2 * p * r / (p + r)) <= 1e-9);
    CHECK(std::fabs(m.f1 - 4.0 / 9.0) <= 1e-9);

    auto perfect = compute_metrics(bipartite_match(gt, gt, s, cfg), gt, gt, s, cfg);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.accuracy == 1.0);
    for (const auto& [field, acc] : perfect.per_field_accuracy) CHECK(acc == 1.0);

    auto none = compute_metrics(bipartite_match(gt, {}, s, cfg), gt, {}, s, cfg);
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);
    CHECK(none.accuracy == 0.0);
}

TEST_CASE("accuracy counts non-key fields of matched pairs") {
    auto s = fixture_schema();
    auto cfg = config_for(s);
    auto a = row("MS2", 25, 50), b = row("Phi6", 25, 50);
    a["decay_rate"] = 0.12;
    b["decay_rate"] = 0.30;
    auto a2 = a, b2 = b;
    a2["humidity"] = 70.0;           // wrong
    b2["decay_rate"] = 0.31;         // within 5%
    b2["surface"] = "steel";         // wrong: truth is null
    auto m = compute_metrics(bipartite_match({a, b}, {a2, b2}, s, cfg), {a, b}, {a2, b2}, s, cfg);
    // 3 non-key fields x 2 pairs, 2 wrong
    CHECK(m.fields_total == 6);
    CHECK(m.fields_correct == 4);
    CHECK(m.accuracy == Catch::Approx(4.0 / 6.0));
    CHECK(m.per_field_accuracy.at("humidity") == 0.5);
    CHECK(m.per_field_accuracy.at("decay_rate") == 1.0);
    CHECK(m.per_field_accuracy.at("surface") == 0.5);
    CHECK(m.per_field_accuracy.count("virus") == 0);

    cfg.accuracy_scope = AccuracyScope::AllFields;
    auto all = compute_metrics(bipartite_match({a, b}, {a2, b2}, s, cfg), {a, b}, {a2, b2}, s, cfg);
    CHECK(all.fields_total == 10);
    CHECK(all.fields_correct == 8);
}

TEST_CASE("swapping truth and extraction swaps precision and recall") {
    auto s = fixture_schema();
    auto cfg = config_for(s);
    cfg.numeric_rel_tol = 0.0;  // symmetric similarity
    std::mt19937_64 rng(7);
    const std::vector<std::string> viruses = {"MS2", "Phi6", "SARS-CoV-2"};
    auto random_table = [&](std::size_t n) {
        std::vector<EvalRow> t;
        for (std::size_t i = 0; i < n; ++i) t.push_back(row(viruses[rng() % 3], static_cast<double>(rng() % 3) * 10.0));
        return t;
    };
    for (int i = 0; i < 200; ++i) {
        auto g = random_table(rng() % 6), e = random_table(rng() % 6);
        auto m1 = compute_metrics(bipartite_match(g, e, s, cfg), g, e, s, cfg);
        auto m2 = compute_metrics(bipartite_match(e, g, s, cfg), e, g, s, cfg);
        CHECK(m1.precision == m2.recall);
        CHECK(m1.recall == m2.precision);
        CHECK(m1.f1 == m2.f1);
        for (double x : {m1.precision, m1.recall, m1.f1, m1.accuracy}) CHECK((x >= 0.0 && x <= 1.0));
        if (m1.precision + m1.recall > 0) CHECK(m1.f1 == Catch::Approx(2 * m1.precision * m1.recall / (m1.precision + m1.recall)));

        // adding an exact copy of an unmatched truth row never lowers recall
        auto match = bipartite_match(g, e, s, cfg);
        if (!match.unmatched_gt.empty()) {
            auto e2 = e;
            e2.push_back(g[match.unmatched_gt.front()]);
            auto m3 = compute_metrics(bipartite_match(g, e2, s, cfg), g, e2, s, cfg);
            CHECK(m3.recall >= m1.recall);
        }
    }
}

TEST_CASE("ground truth CSV loading") {
    auto s = fixture_schema();
    auto gt = load_ground_truth_csv(test_support::fixture("ground_truth.csv"), s);
    REQUIRE(gt.rows.size() == 4);
    CHECK(gt.doc_ids[0] == std::set<std::string>{"paper_a", "paper_b"});
    CHECK(gt.rows[1].at("decay_rate") == 0.30);
    CHECK(gt.rows[2].at("temperature") == 4.0);

    auto quoted = write_temp("quoted.csv",
                             "virus,temperature,surface,doc_id\r\n\"MS2\",\"77 F\",\"steel, \"\"polished\"\"\",x\r\nPhi6,,,\r\n");
    auto t = load_ground_truth_csv(quoted, s);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].at("temperature").get<double>() == Catch::Approx(25.0).margin(1e-9));
    CHECK(t.rows[0].at("surface") == "steel, \"polished\"");
    CHECK(t.rows[1].at("temperature").is_null());
    CHECK(t.doc_ids[1].empty());

    auto expect_invalid = [&](const std::string& name, const std::string& body) {
        try {
            load_ground_truth_csv(write_temp(name, body), s);
            FAIL("accepted " << name);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidValue);
        }
    };
    expect_invalid("bad_cell.csv", "virus,temperature\nMS2,warm\n");
    expect_invalid("bad_column.csv", "virus,colour\nMS2,red\n");
    expect_invalid("ragged.csv", "virus,temperature\nMS2\n");
    expect_invalid("unterminated.csv", "virus,temperature\n\"MS2,4\n");
    CHECK_THROWS_AS(load_ground_truth_csv("/nonexistent/gt.csv", s), Error);
}

TEST_CASE("per-paper and corpus reports") {
    auto s = fixture_schema();
    auto gt = load_ground_truth_csv(test_support::fixture("ground_truth.csv"), s);
    // extraction finds the shared row, paper_b's 4 C row with a wrong rate, and one paper_a Phi6 row
    auto ext = table_from_eval_json(json::parse(R"([
        {"values":{"virus":"MS2","temperature":77,"humidity":50,"decay_rate":0.12,"surface":"steel"},
         "support":{"virus":[{"doc_id":"paper_a"},{"doc_id":"paper_b"}]}},
        {"virus":"MS2","temperature":"4 C","humidity":60,"decay_rate":0.5,"surface":"Steel","doc_id":"paper_b"},
        {"virus":"Phi6","temperature":25,"humidity":50,"decay_rate":0.3,"surface":"steel","doc_id":"paper_a"}
    ])"),
                                    s);
    REQUIRE(ext.rows.size() == 3);
    // unit-less extracted numbers are taken in the field's unit
    CHECK(ext.rows[0].at("temperature") == 77.0);

    MatchConfig cfg;
    auto report = evaluate(gt, ext, s, cfg);
    // row 0 key (MS2, 77) vs truth (MS2, 25): similarity 0.5, still a candidate
    CHECK(report.corpus.n_matched == 3);
    CHECK(report.corpus.precision == 1.0);
    CHECK(report.corpus.recall == 0.75);

    REQUIRE(report.per_paper.size() == 2);
    const auto& a = report.per_paper.at("paper_a");
    CHECK(a.n_gt == 3);
    CHECK(a.n_ext == 2);
    const auto& b = report.per_paper.at("paper_b");
    CHECK(b.n_gt == 2);
    CHECK(b.n_ext == 2);
    CHECK(b.recall == 1.0);

    auto summary = summary_json(report);
    CHECK(summary["n_papers"] == 2);
    CHECK(summary["macro"]["recall"].get<double>() == Catch::Approx((a.recall + b.recall) / 2));
    CHECK(per_paper_json(report).contains("paper_a"));
    auto text = metrics_text_table(report, "fixture");
    CHECK(text.find("fixture") != std::string::npos);
    CHECK(text.find("1.000   0.750") != std::string::npos);
}

TEST_CASE("match config parsing") {
    auto s = fixture_schema();
    auto c = MatchConfig::from_json(json::parse(R"({"key_fields":["virus"],"numeric_rel_tol":0.1,"string_normalizer":"exact"})"));
    CHECK(c.key_fields == std::vector<std::string>{"virus"});
    CHECK(c.numeric_rel_tol == 0.1);
    CHECK(c.string_normalizer == StringNormalizer::Exact);
    CHECK_THROWS_AS(MatchConfig::from_json(json::parse(R"({"string_normalizer":"fuzzy"})")), Error);
    c.key_fields = {"colour"};
    CHECK_THROWS_AS(c.resolved(s), Error);
    c = {};
    c.numeric_rel_tol = -1;
    CHECK_THROWS_AS(c.resolved(s), Error);
}
