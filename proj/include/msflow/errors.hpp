#pragma once

#include <stdexcept>
#include <string>

namespace msflow {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Precondition violation (bad sizes, ranges, non-positive parameters).
struct InvalidArgument : Error {
    using Error::Error;
};

/// A stochastic coordinate left the admissible cube [-1,1]^N.
struct ThetaRangeError : Error {
    using Error::Error;
};

/// Dense or sparse factorization / eigen decomposition failed.
struct EigenSolveError : Error {
    using Error::Error;
};

/// Covariance operator produced eigenvalues below the clipping floor.
struct NonPsdError : Error {
    using Error::Error;
};

/// A requested grid or run exceeds the configured node budget.
struct BudgetError : Error {
    using Error::Error;
};

/// Linear or nonlinear solver did not converge / system singular.
struct SolverError : Error {
    using Error::Error;
};

/// A model evaluation failed; carries the offending stochastic point.
struct EvaluatorError : Error {
    std::vector<double> theta;
    EvaluatorError(const std::string& msg, std::vector<double> point)
        : Error(msg), theta(std::move(point)) {}
};

/// Configuration file / CLI argument problems.
struct ConfigError : Error {
    using Error::Error;
};

/// File read/write failures.
struct IoError : Error {
    using Error::Error;
};

/// A required single-phase velocity library entry is absent.
struct MissingLibraryEntry : Error {
    using Error::Error;
};

}  // namespace msflow
