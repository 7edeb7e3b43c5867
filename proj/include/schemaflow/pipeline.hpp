#pragma once

// End-to-end orchestration: config loading plus the ingest, extract,
// aggregate, and evaluate stages. Every stage reads and writes files so the
// composed `run` and the staged commands produce the same bytes.

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "schemaflow/aggregate.hpp"
#include "schemaflow/document.hpp"
#include "schemaflow/eval.hpp"
#include "schemaflow/gateway.hpp"
#include "schemaflow/http.hpp"
#include "schemaflow/rev.hpp"
#include "schemaflow/schema_generation.hpp"
#include "schemaflow/store.hpp"

namespace schemaflow {

namespace fs = std::filesystem;

/// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitData = 2, kExitGateway = 3 };

inline int exit_code_for(ErrorCode code) {
    if (is_gateway_failure(code)) return kExitGateway;
    switch (code) {
        case ErrorCode::ConfigError:
        case ErrorCode::IoFailure:
        case ErrorCode::ProfileUnknown:
            return kExitConfig;
        default:
            return kExitData;
    }
}

struct EmbedderConfig {
    std::string type = "hashing";  // hashing | http
    std::size_t dimension = 256;
    HttpEmbedder::Options http;
};

struct AggregationSettings {
    int precision = 2;
    std::optional<fs::path> canon_map;
    std::optional<fs::path> unit_rules;
    bool llm_canonicalization = false;
    std::string profile = "canonicalizer";
};

struct RunConfig {
    fs::path base_dir = ".";
    fs::path corpus_dir;
    std::optional<fs::path> schema_path;
    std::optional<std::string> instruction;
    std::string schema_profile = "schema_generator";
    RevConfig rev;
    AggregationSettings aggregation;
    MatchConfig eval;
    std::optional<fs::path> ground_truth;
    std::vector<ProfileConfig> profiles;
    std::optional<fs::path> mock_script;
    EmbedderConfig embedder;
    fs::path output_dir = "out";
    int jobs = 1;

    fs::path store_path() const { return output_dir / "store.bin"; }
    fs::path records_path() const { return output_dir / "records.jsonl"; }
    fs::path rev_audit_path() const { return output_dir / "rev_audit.jsonl"; }
    fs::path gateway_audit_path() const { return output_dir / "gateway_audit.jsonl"; }
    fs::path generated_schema_path() const { return output_dir / "schema.json"; }
    fs::path table_path() const { return output_dir / "table.json"; }
    fs::path conflicts_path() const { return output_dir / "conflicts.jsonl"; }
    fs::path per_paper_path() const { return output_dir / "metrics_per_paper.json"; }
    fs::path summary_path() const { return output_dir / "metrics_summary.json"; }
    fs::path metrics_table_path() const { return output_dir / "metrics.txt"; }
};

namespace detail {

inline std::chrono::milliseconds get_ms(const json& raw, const char* key, std::chrono::milliseconds fallback) {
    if (!raw.contains(key)) return fallback;
    if (!raw[key].is_number() || raw[key].get<double>() < 0)
        throw Error(ErrorCode::ConfigError, key, "expected a non-negative number of milliseconds");
    return std::chrono::milliseconds(raw[key].get<std::int64_t>());
}

inline ProfileConfig profile_from_json(const json& raw, const std::string& path) {
    if (!raw.is_object()) throw Error(ErrorCode::ConfigError, path, "expected an object");
    ProfileConfig p;
    try {
        p.name = raw.at("name").get<std::string>();
        p.backend = raw.value("backend", p.backend);
        p.endpoint = raw.value("endpoint", p.endpoint);
        p.model = raw.value("model", p.model);
        p.api_key_env = raw.value("api_key_env", p.api_key_env);
        p.max_retries = raw.value("max_retries", p.max_retries);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, path, e.what());
    }
    p.backoff_base = get_ms(raw, "backoff_base_ms", p.backoff_base);
    p.backoff_max = get_ms(raw, "backoff_max_ms", p.backoff_max);
    p.min_interval = get_ms(raw, "min_interval_ms", p.min_interval);
    p.timeout = get_ms(raw, "timeout_ms", p.timeout);
    if (p.backend != "mock" && p.backend != "http") throw Error(ErrorCode::ConfigError, path + ".backend", p.backend);
    if (p.backend == "http" && (p.endpoint.empty() || p.model.empty()))
        throw Error(ErrorCode::ConfigError, path, "http profiles need endpoint and model");
    if (p.max_retries < 0) throw Error(ErrorCode::ConfigError, path + ".max_retries", "must be >= 0");
    return p;
}

inline fs::path existing_path(const fs::path& base, const json& value, const std::string& key) {
    if (!value.is_string() || value.get<std::string>().empty())
        throw Error(ErrorCode::ConfigError, key, "expected a path");
    fs::path p = value.get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) throw Error(ErrorCode::ConfigError, key, "no such file: " + p.string());
    return p;
}

template <class T>
T config_value(const json& obj, const char* key, T fallback, const std::string& path) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj[key].get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::ConfigError, path + "." + key, "wrong type");
    }
}

}  // namespace detail

/// Relative paths resolve against `base_dir` (the config file's directory).
inline RunConfig run_config_from_json(const json& raw, const fs::path& base_dir) {
    if (!raw.is_object()) throw Error(ErrorCode::ConfigError, "config", "expected an object");
    static const std::set<std::string> allowed = {"corpus_dir", "schema",      "instruction", "schema_profile",
                                                  "rev",        "aggregation", "eval",        "gateway",
                                                  "mock_script", "embedder",   "output_dir",  "jobs"};
    for (const auto& [k, v] : raw.items())
        if (!allowed.count(k)) throw Error(ErrorCode::ConfigError, k, "unknown config key");

    RunConfig c;
    c.base_dir = base_dir;
    if (!raw.contains("corpus_dir")) throw Error(ErrorCode::ConfigError, "corpus_dir", "required");
    c.corpus_dir = detail::existing_path(base_dir, raw["corpus_dir"], "corpus_dir");
    if (!fs::is_directory(c.corpus_dir)) throw Error(ErrorCode::ConfigError, "corpus_dir", "not a directory");

    bool has_schema = raw.contains("schema"), has_instruction = raw.contains("instruction");
    if (has_schema == has_instruction)
        throw Error(ErrorCode::ConfigError, "schema", "exactly one of schema or instruction is required");
    if (has_schema) c.schema_path = detail::existing_path(base_dir, raw["schema"], "schema");
    else c.instruction = detail::config_value<std::string>(raw, "instruction", "", "config");
    c.schema_profile = detail::config_value(raw, "schema_profile", c.schema_profile, "config");

    if (const json* rev = detail::find(raw, "rev")) {
        c.rev.k = detail::config_value<std::size_t>(*rev, "k", c.rev.k, "rev");
        c.rev.max_rounds = detail::config_value(*rev, "max_rounds", c.rev.max_rounds, "rev");
        c.rev.confidence_threshold = detail::config_value(*rev, "confidence_threshold", c.rev.confidence_threshold, "rev");
        c.rev.profile = detail::config_value(*rev, "profile", c.rev.profile, "rev");
        c.rev.max_repairs = detail::config_value(*rev, "max_repairs", c.rev.max_repairs, "rev");
    }
    validate(c.rev);

    if (const json* agg = detail::find(raw, "aggregation")) {
        c.aggregation.precision = detail::config_value(*agg, "precision", 2, "aggregation");
        if (agg->contains("canon_map")) c.aggregation.canon_map = detail::existing_path(base_dir, (*agg)["canon_map"], "aggregation.canon_map");
        if (agg->contains("unit_rules")) c.aggregation.unit_rules = detail::existing_path(base_dir, (*agg)["unit_rules"], "aggregation.unit_rules");
        c.aggregation.llm_canonicalization = detail::config_value(*agg, "llm_canonicalization", false, "aggregation");
        c.aggregation.profile = detail::config_value(*agg, "profile", c.aggregation.profile, "aggregation");
        if (c.aggregation.precision < 0 || c.aggregation.precision > 12)
            throw Error(ErrorCode::ConfigError, "aggregation.precision", "must be in 0..12");
    }

    if (const json* ev = detail::find(raw, "eval")) {
        json match = *ev;
        if (match.contains("ground_truth")) {
            c.ground_truth = detail::existing_path(base_dir, match["ground_truth"], "eval.ground_truth");
            match.erase("ground_truth");
        }
        c.eval = MatchConfig::from_json(match);
    }

    if (const json* gw = detail::find(raw, "gateway")) {
        const json& profiles = gw->is_object() && gw->contains("profiles") ? (*gw)["profiles"] : *gw;
        if (!profiles.is_array()) throw Error(ErrorCode::ConfigError, "gateway.profiles", "expected a list");
        for (std::size_t i = 0; i < profiles.size(); ++i)
            c.profiles.push_back(detail::profile_from_json(profiles[i], detail::index_path("gateway.profiles", i)));
    }
    if (raw.contains("mock_script")) c.mock_script = detail::existing_path(base_dir, raw["mock_script"], "mock_script");

    if (const json* emb = detail::find(raw, "embedder")) {
        c.embedder.type = detail::config_value<std::string>(*emb, "type", "hashing", "embedder");
        c.embedder.dimension = detail::config_value<std::size_t>(*emb, "dimension", 256, "embedder");
        if (c.embedder.type == "http") {
            c.embedder.http.endpoint = detail::config_value<std::string>(*emb, "endpoint", "", "embedder");
            c.embedder.http.tag = detail::config_value<std::string>(*emb, "tag", "", "embedder");
            c.embedder.http.api_key_env = detail::config_value<std::string>(*emb, "api_key_env", "", "embedder");
            c.embedder.http.dimension = c.embedder.dimension;
            if (c.embedder.http.endpoint.empty()) throw Error(ErrorCode::ConfigError, "embedder.endpoint", "required");
        } else if (c.embedder.type != "hashing") {
            throw Error(ErrorCode::ConfigError, "embedder.type", c.embedder.type);
        }
        if (c.embedder.dimension == 0) throw Error(ErrorCode::ConfigError, "embedder.dimension", "must be positive");
    }

    fs::path out = detail::config_value<std::string>(raw, "output_dir", "out", "config");
    c.output_dir = out.is_relative() ? base_dir / out : out;
    c.jobs = detail::config_value(raw, "jobs", 1, "config");
    if (c.jobs < 1) throw Error(ErrorCode::ConfigError, "jobs", "must be >= 1");
    return c;
}

inline RunConfig load_run_config(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorCode::ConfigError, path.string(), "config file not found");
    json raw;
    try {
        raw = parse_json_file(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, path.string(), e.what());
    }
    return run_config_from_json(raw, fs::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------
// Shared resources

inline std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& c) {
    if (c.type == "http") return std::make_unique<HttpEmbedder>(c.http);
    return std::make_unique<HashingEmbedder>(c.dimension);
}

inline UnitTable load_units(const RunConfig& c) {
    if (!c.aggregation.unit_rules) return UnitTable::builtin();
    try {
        return UnitTable::from_json(parse_json_file(*c.aggregation.unit_rules));
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, c.aggregation.unit_rules->string(), e.what());
    }
}

/// Gateway with every configured profile. A mock script backs all mock
/// profiles; the profiles the pipeline uses default to mock when unlisted.
inline std::unique_ptr<Gateway> make_gateway(const RunConfig& c) {
    auto gateway = std::make_unique<Gateway>();
    std::shared_ptr<MockBackend> mock;
    if (c.mock_script) {
        try {
            mock = MockBackend::from_json(parse_json_file(*c.mock_script));
        } catch (const Error& e) {
            throw Error(ErrorCode::ConfigError, c.mock_script->string(), e.what());
        }
    } else {
        mock = std::make_shared<MockBackend>();
    }
    auto http = std::make_shared<HttpBackend>();
    std::set<std::string> named;
    for (const auto& p : c.profiles) {
        named.insert(p.name);
        if (p.backend == "http") gateway->add_profile(p, http);
        else gateway->add_profile(p, mock);
    }
    for (const auto& name : {c.rev.profile, c.schema_profile, c.aggregation.profile}) {
        if (named.count(name)) continue;
        ProfileConfig p;
        p.name = name;
        gateway->add_profile(p, mock);
    }
    return gateway;
}

/// *.json and *.jsonl files directly inside `dir`, sorted by name.
inline std::vector<fs::path> corpus_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension();
        if (ext == ".json" || ext == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

/// Loads documents from files in order; a doc_id seen in two files is an
/// error naming both.
inline std::vector<Document> load_corpus(const std::vector<fs::path>& files) {
    std::vector<Document> docs;
    std::map<std::string, std::string> origin_of;
    for (const auto& f : files) {
        for (auto& loaded : load_documents(f)) {
            auto [it, inserted] = origin_of.emplace(loaded.document.doc_id, loaded.origin);
            if (!inserted)
                throw Error(ErrorCode::DuplicateId, it->second + ", " + loaded.origin,
                            "doc_id '" + loaded.document.doc_id + "' appears in both");
            docs.push_back(std::move(loaded.document));
        }
    }
    return docs;
}

inline Schema resolve_schema(const RunConfig& c, Gateway* gateway, const UnitTable& units) {
    if (c.schema_path) {
        json raw;
        try {
            raw = parse_json_file(*c.schema_path);
        } catch (const Error& e) {
            throw Error(ErrorCode::ConfigError, c.schema_path->string(), e.what());
        }
        return parse_schema(raw, units);
    }
    if (!gateway) throw Error(ErrorCode::ConfigError, "instruction", "schema generation needs a gateway");
    auto generated = generate_schema(*c.instruction, *gateway, c.schema_profile, units);
    write_file(c.generated_schema_path(), to_json(generated.schema).dump(2) + "\n");
    return generated.schema;
}

// ---------------------------------------------------------------------------
// Stages

struct IngestSummary {
    std::size_t documents = 0;
    std::size_t text = 0;
    std::size_t tables = 0;
    std::size_t figures = 0;
    std::size_t total() const { return text + tables + figures; }
};

inline IngestSummary ingest(const std::vector<Document>& docs, const Embedder& embedder, const fs::path& store_path,
                            int jobs = 1) {
    std::vector<std::vector<StoreEntry>> per_doc(docs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < docs.size(); i = next++) {
            try {
                per_doc[i] = build_entries(docs[i], embedder);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (int t = 1; t < std::min<int>(jobs, static_cast<int>(docs.size())); ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);

    VectorStore store(embedder);
    IngestSummary summary;
    summary.documents = docs.size();
    std::vector<StoreEntry> all;
    for (auto& batch : per_doc)
        for (auto& e : batch) {
            (e.modality == Modality::Text ? summary.text : e.modality == Modality::Table ? summary.tables : summary.figures)++;
            all.push_back(std::move(e));
        }
    store.index(std::move(all));
    store.persist(store_path);
    return summary;
}

struct ExtractOutput {
    std::vector<ExtractionRecord> records;
    std::vector<json> audit;  // one line per (doc, round)
};

/// Runs the loop per document in parallel; outputs are concatenated in
/// document order. Documents absent from the store are skipped.
inline ExtractOutput extract_corpus(const std::vector<Document>& docs, const Schema& schema, const VectorStore& store,
                                    const Embedder& embedder, Gateway& gateway, const RevConfig& rev,
                                    const UnitTable& units, int jobs = 1) {
    auto indexed = store.doc_ids();
    std::vector<std::optional<RevRun>> runs(docs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < docs.size(); i = next++) {
            if (!std::binary_search(indexed.begin(), indexed.end(), docs[i].doc_id)) continue;
            try {
                runs[i] = run(docs[i], schema, store, embedder, gateway, rev, units);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (int t = 1; t < std::min<int>(jobs, static_cast<int>(docs.size())); ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);

    ExtractOutput out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (!runs[i]) continue;
        for (auto& r : runs[i]->records) out.records.push_back(std::move(r));
        for (const auto& a : runs[i]->audit) {
            auto line = to_json(a);
            line["doc_id"] = docs[i].doc_id;
            out.audit.push_back(std::move(line));
        }
    }
    return out;
}

inline CanonMap load_canon_map(const RunConfig& c) {
    if (!c.aggregation.canon_map) return {};
    return CanonMap::from_json(parse_json_file(*c.aggregation.canon_map));
}

// ---------------------------------------------------------------------------
// File-level commands. Each returns a short human-readable summary.

struct Overrides {
    std::optional<fs::path> store;
    std::optional<fs::path> records;
    std::optional<fs::path> table;
    std::optional<fs::path> ground_truth;
    std::vector<fs::path> documents;
};

inline std::string cmd_ingest(const RunConfig& c, const Overrides& o = {}) {
    auto files = o.documents.empty() ? corpus_files(c.corpus_dir) : o.documents;
    auto docs = load_corpus(files);
    auto embedder = make_embedder(c.embedder);
    auto s = ingest(docs, *embedder, o.store.value_or(c.store_path()), c.jobs);
    return "ingested " + std::to_string(s.documents) + " documents: " + std::to_string(s.total()) + " entries (" +
           std::to_string(s.text) + " text, " + std::to_string(s.tables) + " table, " + std::to_string(s.figures) +
           " figure)";
}

inline std::string cmd_extract(const RunConfig& c, const Overrides& o = {}) {
    auto units = load_units(c);
    auto gateway = make_gateway(c);
    auto schema = resolve_schema(c, gateway.get(), units);
    auto store_path = o.store.value_or(c.store_path());
    if (!fs::exists(store_path)) throw Error(ErrorCode::ConfigError, store_path.string(), "store not found; run ingest");
    auto store = VectorStore::load(store_path);
    auto embedder = make_embedder(c.embedder);
    auto docs = load_corpus(corpus_files(c.corpus_dir));
    auto out = extract_corpus(docs, schema, store, *embedder, *gateway, c.rev, units, c.jobs);
    write_file(o.records.value_or(c.records_path()), records_to_jsonl(out.records));
    write_file(c.rev_audit_path(), to_json_lines(out.audit));
    write_file(c.gateway_audit_path(), gateway->audit_jsonl());
    return "extracted " + std::to_string(out.records.size()) + " records";
}

inline std::string cmd_aggregate(const RunConfig& c, const Overrides& o = {}) {
    auto units = load_units(c);
    std::unique_ptr<Gateway> gateway;
    if (c.aggregation.llm_canonicalization || c.instruction) gateway = make_gateway(c);
    auto schema = resolve_schema(c, gateway.get(), units);
    auto records_path = o.records.value_or(c.records_path());
    if (!fs::exists(records_path)) throw Error(ErrorCode::ConfigError, records_path.string(), "records not found");
    auto records = records_from_jsonl(read_file(records_path), records_path.string());

    AggregateConfig ac;
    ac.precision = c.aggregation.precision;
    ac.canon_map = load_canon_map(c);
    ac.units = units;
    ac.gateway = c.aggregation.llm_canonicalization ? gateway.get() : nullptr;
    ac.canonicalization_profile = c.aggregation.profile;
    auto result = aggregate(records, schema, ac);
    write_file(o.table.value_or(c.table_path()), table_to_json(result.table).dump(2) + "\n");
    write_file(c.conflicts_path(), conflict_log_jsonl(result));
    return "aggregated " + std::to_string(records.size()) + " records into " + std::to_string(result.table.size()) +
           " rows (" + std::to_string(result.conflicts.size()) + " conflicts)";
}

inline std::string cmd_evaluate(const RunConfig& c, const Overrides& o = {}) {
    auto gt_path = o.ground_truth ? o.ground_truth : c.ground_truth;
    if (!gt_path) throw Error(ErrorCode::ConfigError, "eval.ground_truth", "no ground truth configured");
    if (!fs::exists(*gt_path)) throw Error(ErrorCode::ConfigError, gt_path->string(), "ground truth not found");
    auto units = load_units(c);
    std::unique_ptr<Gateway> gateway;
    if (c.instruction) gateway = make_gateway(c);
    auto schema = resolve_schema(c, gateway.get(), units);
    auto table_path = o.table.value_or(c.table_path());
    if (!fs::exists(table_path)) throw Error(ErrorCode::ConfigError, table_path.string(), "table not found");

    auto match_cfg = c.eval;
    if (match_cfg.string_normalizer == StringNormalizer::Canonicalized) match_cfg.canon_map = load_canon_map(c);
    EvalTable gt = gt_path->extension() == ".csv"
                       ? load_ground_truth_csv(*gt_path, schema, units)
                       : table_from_eval_json(parse_json_file(*gt_path), schema, units, true, gt_path->string());
    auto ext = table_from_eval_json(parse_json_file(table_path), schema, units, false, table_path.string());
    auto report = evaluate(gt, ext, schema, match_cfg);
    write_file(c.per_paper_path(), per_paper_json(report).dump(2) + "\n");
    write_file(c.summary_path(), summary_json(report).dump(2) + "\n");
    auto table = metrics_text_table(report);
    write_file(c.metrics_table_path(), table);
    return table;
}

inline std::string cmd_run(const RunConfig& c) {
    std::string out;
    out += cmd_ingest(c) + "\n";
    out += cmd_extract(c) + "\n";
    out += cmd_aggregate(c) + "\n";
    if (c.ground_truth) out += cmd_evaluate(c);
    return out;
}

}  // namespace schemaflow
