#pragma once

#include <stdexcept>
#include <string>

namespace mlgms {

/// Invalid configuration or arguments. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation (e.g. nonpositive permeability).
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Solver breakdown, failed factorization, residual above tolerance. Exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Corrupt or mismatched persisted data.
class IntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mlgms
