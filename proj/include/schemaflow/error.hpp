#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace schemaflow {

enum class ErrorCode {
    // document model
    MissingField,
    InvalidValue,
    BadReference,
    DuplicateId,
    // store / embedding
    EmptyText,
    ServiceUnavailable,
    DuplicateEntryId,
    DimensionMismatch,
    EmbedderMismatch,
    IoFailure,
    FormatVersionMismatch,
    // schema
    UnknownDtype,
    UnknownKey,
    MissingVocabulary,
    NoKeyField,
    DuplicateFieldName,
    InvalidSchema,
    SchemaInvalidAfterRepair,
    // gateway
    GatewayError,
    Timeout,
    RateLimited,
    AuthFailure,
    ProfileUnknown,
    MockUnmatched,
    StructureInvalidAfterRepair,
    // misc
    ContractViolation,
    ConfigError,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::InvalidValue: return "InvalidValue";
        case ErrorCode::BadReference: return "BadReference";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::EmptyText: return "EmptyText";
        case ErrorCode::ServiceUnavailable: return "ServiceUnavailable";
        case ErrorCode::DuplicateEntryId: return "DuplicateEntryId";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EmbedderMismatch: return "EmbedderMismatch";
        case ErrorCode::IoFailure: return "IoFailure";
        case ErrorCode::FormatVersionMismatch: return "FormatVersionMismatch";
        case ErrorCode::UnknownDtype: return "UnknownDtype";
        case ErrorCode::UnknownKey: return "UnknownKey";
        case ErrorCode::MissingVocabulary: return "MissingVocabulary";
        case ErrorCode::NoKeyField: return "NoKeyField";
        case ErrorCode::DuplicateFieldName: return "DuplicateFieldName";
        case ErrorCode::InvalidSchema: return "InvalidSchema";
        case ErrorCode::SchemaInvalidAfterRepair: return "SchemaInvalidAfterRepair";
        case ErrorCode::GatewayError: return "GatewayError";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::RateLimited: return "RateLimited";
        case ErrorCode::AuthFailure: return "AuthFailure";
        case ErrorCode::ProfileUnknown: return "ProfileUnknown";
        case ErrorCode::MockUnmatched: return "MockUnmatched";
        case ErrorCode::StructureInvalidAfterRepair: return "StructureInvalidAfterRepair";
        case ErrorCode::ContractViolation: return "ContractViolation";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Transient gateway failures are retried; everything else surfaces immediately.
constexpr bool is_transient(ErrorCode code) {
    return code == ErrorCode::Timeout || code == ErrorCode::RateLimited ||
           code == ErrorCode::ServiceUnavailable;
}

constexpr bool is_gateway_failure(ErrorCode code) {
    switch (code) {
        case ErrorCode::GatewayError:
        case ErrorCode::Timeout:
        case ErrorCode::RateLimited:
        case ErrorCode::AuthFailure:
        case ErrorCode::ServiceUnavailable:
        case ErrorCode::MockUnmatched:
        case ErrorCode::SchemaInvalidAfterRepair:
            return true;
        default:
            return false;
    }
}

/// Every failure raised by the library. `path` names the offending location
/// (JSON path, field name, file) when there is one.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string path, const std::string& detail = {})
        : std::runtime_error(compose(code, path, detail)),
          code_(code),
          path_(std::move(path)),
          detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& path() const noexcept { return path_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    static std::string compose(ErrorCode code, const std::string& path,
                               const std::string& detail) {
        std::string out(to_string(code));
        if (!path.empty()) out += "(" + path + ")";
        if (!detail.empty()) out += ": " + detail;
        return out;
    }

    ErrorCode code_;
    std::string path_;
    std::string detail_;
};

inline void require(bool condition, std::string_view what) {
    if (!condition) throw Error(ErrorCode::ContractViolation, std::string(what));
}

}  // namespace schemaflow
