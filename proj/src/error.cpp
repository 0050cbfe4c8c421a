#include "subreg/error.hpp"

namespace subreg {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::RankDeficient: return "RankDeficient";
        case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
        case ErrorKind::UnstableSystem: return "UnstableSystem";
        case ErrorKind::NonFiniteState: return "NonFiniteState";
        case ErrorKind::CutLocus: return "CutLocus";
        case ErrorKind::ZeroVelocity: return "ZeroVelocity";
        case ErrorKind::NonPositiveCoefficient: return "NonPositiveCoefficient";
        case ErrorKind::CflViolation: return "CflViolation";
        case ErrorKind::FormatVersionMismatch: return "FormatVersionMismatch";
        case ErrorKind::CorruptHeader: return "CorruptHeader";
        case ErrorKind::TruncatedPayload: return "TruncatedPayload";
        case ErrorKind::DivergenceDetected: return "DivergenceDetected";
        case ErrorKind::SingularCoarseMatrix: return "SingularCoarseMatrix";
        case ErrorKind::MaxIterations: return "MaxIterations";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace subreg
