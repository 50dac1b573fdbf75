#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace octagraph {

enum class ErrorCode {
    MalformedInput,
    TooSmall,
    EmptyMask,
    NoFazCandidate,
    EmptyGraph,
    UnsupportedVersion,
    SchemaViolation,
    InvalidConfig,
    EmptyDataset,
    ShapeMismatch,
    InvalidSteps,
    DimensionMismatch,
    Mismatch,
    EmptyIndex,
    DuplicateSourceId,
    MissingGroundTruth,
    TransportError,
    MalformedResponse,
    AuthError,
    EmptyPairs,
    InvalidSpec,
    IoError,
    OutOfRange,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception; callers switch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

}  // namespace octagraph
