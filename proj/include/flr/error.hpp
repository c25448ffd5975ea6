#pragma once

#include <stdexcept>
#include <string>

namespace flr {

// Bad parameters, malformed input files, unsupported constructions.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A weight sequence left the IEEE double range.
class SaturationError : public std::overflow_error {
public:
    using std::overflow_error::overflow_error;
};

// Factorization or solve failures, divergent sums.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace flr
