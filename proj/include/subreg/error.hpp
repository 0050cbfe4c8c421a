#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace subreg {

enum class ErrorKind {
    InvalidArgument,
    RankDeficient,
    ConvergenceFailure,
    UnstableSystem,
    NonFiniteState,
    CutLocus,
    ZeroVelocity,
    NonPositiveCoefficient,
    CflViolation,
    FormatVersionMismatch,
    CorruptHeader,
    TruncatedPayload,
    DivergenceDetected,
    SingularCoarseMatrix,
    MaxIterations,
    ConfigError,
    IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries one of the kinds above so
/// callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorKind::InvalidArgument, what);
}

}  // namespace subreg
