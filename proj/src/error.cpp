#include "regscore/error.hpp"

namespace regscore {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::EmptyDomain: return "EmptyDomain";
        case ErrorCode::InvalidDomain: return "InvalidDomain";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::BatchTooSmall: return "BatchTooSmall";
        case ErrorCode::DimMismatch: return "DimMismatch";
        case ErrorCode::StaleActivations: return "StaleActivations";
        case ErrorCode::EmptyBatch: return "EmptyBatch";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::DatasetTooSmall: return "DatasetTooSmall";
        case ErrorCode::Diverged: return "Diverged";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
        case ErrorCode::CorruptBundle: return "CorruptBundle";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace regscore
