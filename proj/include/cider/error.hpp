#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cider {

// Failure taxonomy shared by every module. The CLI maps kinds onto exit
// codes: usage/config/file problems -> 1, provider failures -> 2, internal
// invariant violations -> 3.
enum class ErrorKind {
    ProviderUnavailable,
    EmptyInput,
    DimensionMismatch,
    ZeroNorm,
    MalformedVlmOutput,
    BiasMismatch,
    SourceBiasMismatch,
    EmptyExemplars,
    ScoreOutOfRange,
    IoError,
    SchemaVersionMismatch,
    CorruptFile,
    SchemaError,
    DuplicateId,
    ConfigError,
    Internal,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    // Stage attribution for pipeline errors ("t2i", "detect", ...). Empty
    // when the failure did not occur inside a pipeline stage.
    const std::string& stage() const noexcept { return stage_; }
    void set_stage(const std::string& stage) { stage_ = stage; }

private:
    ErrorKind kind_;
    std::string stage_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace cider
