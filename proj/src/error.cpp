#include "longbasis/error.hpp"

namespace longbasis {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::MissingCell: return "MissingCell";
    case ErrorKind::NonPositiveExposure: return "NonPositiveExposure";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::EmptyAgeIntersection: return "EmptyAgeIntersection";
    case ErrorKind::EmptyYearOverlap: return "EmptyYearOverlap";
    case ErrorKind::ZeroRateCell: return "ZeroRateCell";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::DegenerateFit: return "DegenerateFit";
    case ErrorKind::DegenerateB: return "DegenerateB";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::DegenerateSeries: return "DegenerateSeries";
    case ErrorKind::EmptyList: return "EmptyList";
    case ErrorKind::ScenarioRefitFailure: return "ScenarioRefitFailure";
    case ErrorKind::ZeroSwapVariance: return "ZeroSwapVariance";
    case ErrorKind::ZeroUnhedgedVariance: return "ZeroUnhedgedVariance";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::PipelineError: return "PipelineError";
    case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

} // namespace longbasis
