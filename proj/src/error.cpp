#include "cider/error.hpp"

namespace cider {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::ZeroNorm: return "ZeroNorm";
        case ErrorKind::MalformedVlmOutput: return "MalformedVlmOutput";
        case ErrorKind::BiasMismatch: return "BiasMismatch";
        case ErrorKind::SourceBiasMismatch: return "SourceBiasMismatch";
        case ErrorKind::EmptyExemplars: return "EmptyExemplars";
        case ErrorKind::ScoreOutOfRange: return "ScoreOutOfRange";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::SchemaVersionMismatch: return "SchemaVersionMismatch";
        case ErrorKind::CorruptFile: return "CorruptFile";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::DuplicateId: return "DuplicateId";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::Internal: return "Internal";
    }
    return "Unknown";
}

}  // namespace cider
