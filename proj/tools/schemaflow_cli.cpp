#include <iostream>

#include <CLI11.hpp>

#include "schemaflow/pipeline.hpp"

namespace sf = schemaflow;

namespace {

struct Options {
    std::string config;
    std::string store;
    std::string records;
    std::string table;
    std::string ground_truth;
    std::vector<std::string> documents;
    int jobs = 0;
    std::string schema_file;
    std::string instruction;
    std::string out;
    std::string output_dir;
};

sf::RunConfig load_config(const Options& o) {
    auto c = sf::load_run_config(o.config);
    if (o.jobs > 0) c.jobs = o.jobs;
    if (!o.output_dir.empty()) c.output_dir = sf::fs::absolute(o.output_dir);
    return c;
}

sf::Overrides overrides(const Options& o) {
    sf::Overrides ov;
    if (!o.store.empty()) ov.store = o.store;
    if (!o.records.empty()) ov.records = o.records;
    if (!o.table.empty()) ov.table = o.table;
    if (!o.ground_truth.empty()) ov.ground_truth = o.ground_truth;
    for (const auto& d : o.documents) ov.documents.emplace_back(d);
    return ov;
}

int ingest_without_config(const Options& o) {
    if (o.store.empty()) throw sf::Error(sf::ErrorCode::ConfigError, "--store", "required without --config");
    std::vector<sf::fs::path> files(o.documents.begin(), o.documents.end());
    auto docs = sf::load_corpus(files);
    sf::HashingEmbedder embedder;
    auto s = sf::ingest(docs, embedder, o.store, std::max(1, o.jobs));
    std::cout << "ingested " << s.documents << " documents: " << s.total() << " entries (" << s.text << " text, "
              << s.tables << " table, " << s.figures << " figure)\n";
    return sf::kExitOk;
}

int schema_validate(const Options& o) {
    auto raw = sf::parse_json_file(o.schema_file);
    auto schema = sf::parse_schema(raw);
    std::cout << "valid schema: " << schema.fields.size() << " fields, keys: " << sf::text::join(schema.key_fields(), ", ")
              << "\n";
    return sf::kExitOk;
}

int schema_generate(const Options& o) {
    auto c = load_config(o);
    auto units = sf::load_units(c);
    auto gateway = sf::make_gateway(c);
    auto instruction = !o.instruction.empty() ? o.instruction : c.instruction.value_or("");
    if (instruction.empty()) throw sf::Error(sf::ErrorCode::ConfigError, "instruction", "no instruction given");
    auto generated = sf::generate_schema(instruction, *gateway, c.schema_profile, units);
    auto text = sf::to_json(generated.schema).dump(2) + "\n";
    if (o.out.empty()) std::cout << text;
    else sf::write_file(o.out, text);
    return sf::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Schema-driven extraction of experimental data tables from document collections"};
    app.require_subcommand(1);
    Options o;

    auto add_config = [&](CLI::App* cmd, bool required) {
        auto* opt = cmd->add_option("-c,--config", o.config, "Run configuration JSON");
        if (required) opt->required();
        cmd->add_option("-j,--jobs", o.jobs, "Parallel documents (overrides config)");
        cmd->add_option("--output-dir", o.output_dir, "Artifact directory (overrides config)");
    };

    auto* ingest = app.add_subcommand("ingest", "Validate, embed, and index documents into a store file");
    add_config(ingest, false);
    ingest->add_option("documents", o.documents, "Document JSON / JSON-lines files (default: corpus_dir)");
    ingest->add_option("--store", o.store, "Output store file");

    auto* extract = app.add_subcommand("extract", "Run the retrieval-extraction-verification loop per document");
    add_config(extract, true);
    extract->add_option("--store", o.store, "Store file");
    extract->add_option("--records", o.records, "Output records JSON-lines");

    auto* aggregate = app.add_subcommand("aggregate", "Merge records into one unified table");
    add_config(aggregate, true);
    aggregate->add_option("--records", o.records, "Input records JSON-lines");
    aggregate->add_option("--table", o.table, "Output table JSON");

    auto* evaluate = app.add_subcommand("evaluate", "Score a unified table against ground truth");
    add_config(evaluate, true);
    evaluate->add_option("--table", o.table, "Table JSON to score");
    evaluate->add_option("--ground-truth", o.ground_truth, "Ground truth CSV or JSON");

    auto* run = app.add_subcommand("run", "ingest, extract, aggregate, and evaluate in one go");
    add_config(run, true);

    auto* schema = app.add_subcommand("schema", "Schema utilities");
    schema->require_subcommand(1);
    auto* validate = schema->add_subcommand("validate", "Check an explicit schema file");
    validate->add_option("file", o.schema_file, "Schema JSON")->required();
    auto* generate = schema->add_subcommand("generate", "Generate a schema from an instruction");
    add_config(generate, true);
    generate->add_option("-i,--instruction", o.instruction, "Natural-language request (overrides config)");
    generate->add_option("-o,--out", o.out, "Write the schema here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? sf::kExitOk : sf::kExitConfig;
    }

    try {
        if (*ingest) {
            if (o.config.empty()) return ingest_without_config(o);
            std::cout << sf::cmd_ingest(load_config(o), overrides(o)) << "\n";
        } else if (*extract) {
            std::cout << sf::cmd_extract(load_config(o), overrides(o)) << "\n";
        } else if (*aggregate) {
            std::cout << sf::cmd_aggregate(load_config(o), overrides(o)) << "\n";
        } else if (*evaluate) {
            std::cout << sf::cmd_evaluate(load_config(o), overrides(o));
        } else if (*run) {
            std::cout << sf::cmd_run(load_config(o));
        } else if (*validate) {
            return schema_validate(o);
        } else if (*generate) {
            return schema_generate(o);
        }
    } catch (const sf::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return sf::exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return sf::kExitData;
    }
    return sf::kExitOk;
}
