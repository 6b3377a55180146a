#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace longbasis {

enum class ErrorKind {
    MissingCell,
    NonPositiveExposure,
    MalformedRow,
    DomainError,
    EmptyAgeIntersection,
    EmptyYearOverlap,
    ZeroRateCell,
    NonConvergence,
    DegenerateFit,
    DegenerateB,
    QuadratureFailure,
    DegenerateSeries,
    EmptyList,
    ScenarioRefitFailure,
    ZeroSwapVariance,
    ZeroUnhedgedVariance,
    ConfigError,
    PipelineError,
    IoError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Throws Error(kind, message) unless condition holds.
inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition)
        throw Error(kind, message);
}

} // namespace longbasis
