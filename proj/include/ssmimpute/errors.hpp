#pragma once

#include <stdexcept>
#include <string>

namespace ssmimpute {

/// API misuse: a documented precondition was violated by the caller.
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

/// Bad configuration, schema violation, or malformed input file.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Too few usable rows/observations to run the requested computation.
struct InsufficientDataError : std::runtime_error {
    explicit InsufficientDataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown (non-PSD covariance, degenerate innovation variance, ...).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-fatal diagnostics go to stderr; never interleaved into data outputs.
void warn(const std::string& msg);

}  // namespace ssmimpute
