#pragma once

#include <stdexcept>
#include <string>

namespace kz {

// Bad user input: malformed config, out-of-range parameters, inconsistent
// options.  Maps to process exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Request exceeds a declared resource budget (statevector memory, MPS bond
// storage).  Maps to exit code 3.
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure in an iterative or algebraic routine: infeasible moment
// vector, non-converged solver, renormalization factor below its floor,
// SVD breakdown.  Maps to exit code 4.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace kz
