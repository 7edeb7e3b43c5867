#pragma once

#include <string>
#include <vector>

#include "schemaflow/gateway.hpp"
#include "schemaflow/schema.hpp"

namespace schemaflow {

struct GeneratedSchema {
    Schema schema;
    std::vector<std::string> raw_outputs;  // one per gateway call
    int repairs = 0;
    std::vector<json> alternates;          // extra candidates, kept verbatim
};

inline const char* schema_generation_system_prompt() {
    return "You design extraction schemas for scientific literature. Given a request, reply with "
           "one JSON object {\"schema_id\": string, \"description\": string, \"fields\": [...]}. "
           "Each field is {\"name\", \"dtype\" (string|float|integer|boolean|categorical|"
           "list_of(<dtype>)), \"unit\" (optional canonical symbol), \"vocabulary\" (required for "
           "categorical), \"required\", \"is_key\", \"range\" ({min,max}, optional), "
           "\"description\"}. Mark as is_key the fields whose values distinguish one experimental "
           "row from another. Reply with JSON only.";
}

/// Builds a schema from a natural-language request. One repair round with the
/// validation error fed back; after that the failure is final.
inline GeneratedSchema generate_schema(const std::string& instruction, Gateway& gateway,
                                       const std::string& profile,
                                       const UnitTable& units = default_unit_table()) {
    require(!text::trim(instruction).empty(), "generate_schema: instruction must be non-empty");
    GeneratedSchema out;
    PromptRequest req;
    req.model_profile = profile;
    req.system = schema_generation_system_prompt();
    req.user = "Request: " + instruction;

    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (attempt == 1) {
            req.user = "Request: " + instruction + "\n\nYour previous schema was rejected: " +
                       last_error + "\nPrevious output:\n" + out.raw_outputs.back() +
                       "\nReturn the corrected schema as JSON only.";
        }
        std::string raw;
        try {
            raw = gateway.complete(req).text;
        } catch (const Error& e) {
            throw Error(ErrorCode::GatewayError, profile, e.what());
        }
        out.raw_outputs.push_back(raw);
        auto parsed = extract_json(raw);
        if (!parsed) {
            last_error = "output is not valid JSON";
            out.repairs = attempt + 1;
            continue;
        }
        json candidate = *parsed;
        std::vector<json> alternates;
        if (candidate.is_array() && !candidate.empty()) {
            alternates.assign(candidate.begin() + 1, candidate.end());
            candidate = json(candidate[0]);
        }
        try {
            out.schema = parse_schema(candidate, units);
            out.repairs = attempt;
            out.alternates = std::move(alternates);
            return out;
        } catch (const Error& e) {
            last_error = e.what();
            out.repairs = attempt + 1;
        }
    }
    throw Error(ErrorCode::SchemaInvalidAfterRepair, "schema", last_error);
}

}  // namespace schemaflow
