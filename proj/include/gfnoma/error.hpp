#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gfnoma {

enum class Errc {
    NonPrimitivePolynomial,
    InvalidDegree,
    DivisionByZero,
    InvalidCapability,
    MessageOutOfRange,
    InvalidZcParams,
    LengthMismatch,
    InvalidArgument,
    BudgetExceeded,
    DivergenceDetected,
    InfeasibleGrid,
    ConfigError,
    CheckpointMissing,
    FileError,
};

constexpr std::string_view to_string(Errc e) noexcept {
    switch (e) {
    case Errc::NonPrimitivePolynomial: return "NonPrimitivePolynomial";
    case Errc::InvalidDegree: return "InvalidDegree";
    case Errc::DivisionByZero: return "DivisionByZero";
    case Errc::InvalidCapability: return "InvalidCapability";
    case Errc::MessageOutOfRange: return "MessageOutOfRange";
    case Errc::InvalidZcParams: return "InvalidZcParams";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::BudgetExceeded: return "BudgetExceeded";
    case Errc::DivergenceDetected: return "DivergenceDetected";
    case Errc::InfeasibleGrid: return "InfeasibleGrid";
    case Errc::ConfigError: return "ConfigError";
    case Errc::CheckpointMissing: return "CheckpointMissing";
    case Errc::FileError: return "FileError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the Errc codes so
/// callers (and the CLI exit-code mapping) can branch on the kind.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

} // namespace gfnoma
