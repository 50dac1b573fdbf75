#include "octagraph/error.hpp"

namespace octagraph {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MalformedInput: return "MalformedInput";
        case ErrorCode::TooSmall: return "TooSmall";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::NoFazCandidate: return "NoFazCandidate";
        case ErrorCode::EmptyGraph: return "EmptyGraph";
        case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
        case ErrorCode::SchemaViolation: return "SchemaViolation";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::InvalidSteps: return "InvalidSteps";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::Mismatch: return "Mismatch";
        case ErrorCode::EmptyIndex: return "EmptyIndex";
        case ErrorCode::DuplicateSourceId: return "DuplicateSourceId";
        case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
        case ErrorCode::TransportError: return "TransportError";
        case ErrorCode::MalformedResponse: return "MalformedResponse";
        case ErrorCode::AuthError: return "AuthError";
        case ErrorCode::EmptyPairs: return "EmptyPairs";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace octagraph
