#pragma once

#include <stdexcept>
#include <string>

namespace graphik {

// Invalid arguments are reported with std::invalid_argument. The types below
// cover the remaining categories the CLI maps onto exit codes.

/// Operation called in the wrong state (e.g. backward before any forward).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite loss, gradient or parameter encountered.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rejection sampling could not find a new accepted sample.
class SaturationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Metric undefined for the given data (e.g. R^2 with zero target variance).
class UndefinedMetricError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// File could not be read/written or has a malformed layout.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs are individually valid but incompatible with each other
/// (dof mismatch between checkpoint and dataset, digest mismatch, ...).
class PreconditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace graphik
