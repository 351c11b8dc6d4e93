#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace regscore {

enum class ErrorCode {
    EmptyDomain,
    InvalidDomain,
    InvalidConfig,
    BatchTooSmall,
    DimMismatch,
    StaleActivations,
    EmptyBatch,
    ParseError,
    EmptyDataset,
    DatasetTooSmall,
    Diverged,
    LengthMismatch,
    EmptyEvaluation,
    CorruptBundle,
    VersionMismatch,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers dispatch on `code()`.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace regscore
