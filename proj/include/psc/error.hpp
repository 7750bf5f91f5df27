#pragma once

#include <stdexcept>
#include <string>

namespace psc {

enum class ErrorCode {
    BoundaryMargin,
    NotPositiveDefinite,
    DimensionMismatch,
    OutOfRange,
    NonFinite,
    NonTermination,
    Underflow,
    UnsupportedCase,
    EndMetricMismatch,
    Io,
    Config,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::BoundaryMargin: return "boundary-margin";
        case ErrorCode::NotPositiveDefinite: return "not-positive-definite";
        case ErrorCode::DimensionMismatch: return "dimension-mismatch";
        case ErrorCode::OutOfRange: return "out-of-range";
        case ErrorCode::NonFinite: return "non-finite";
        case ErrorCode::NonTermination: return "non-termination";
        case ErrorCode::Underflow: return "underflow";
        case ErrorCode::UnsupportedCase: return "unsupported-case";
        case ErrorCode::EndMetricMismatch: return "end-metric-mismatch";
        case ErrorCode::Io: return "io";
        case ErrorCode::Config: return "config";
    }
    return "unknown";
}

// Precondition and domain violations. Certificate failures are not errors;
// they come back as a CertificateReport with passed == false.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace psc
