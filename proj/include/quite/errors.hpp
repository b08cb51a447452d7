#pragma once

#include <stdexcept>
#include <string>

namespace quite {

// Bad user input: malformed files, inconsistent configs, impossible shapes.
// The CLI maps this family to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// NaN/Inf produced by an operation, or training divergence. Exit code 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace quite
