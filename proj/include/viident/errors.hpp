#pragma once

#include <stdexcept>
#include <string>

namespace viident {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation
/// (non-positive eps, inadmissible parameter, dimension mismatch).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid mesh description, config file or experiment setup.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An iterative solver stopped without meeting its tolerance.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double last_residual, int iterations)
        : Error(what), last_residual_(last_residual), iterations_(iterations) {}

    double last_residual() const noexcept { return last_residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double last_residual_;
    int iterations_;
};

}  // namespace viident
