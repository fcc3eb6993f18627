#pragma once

#include <stdexcept>
#include <string>

namespace wmest {

/// Malformed or inconsistent input (dimension mismatch, bad weights, bad file).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation could not produce a usable result (singular matrix, nonpositive determinant).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace wmest
