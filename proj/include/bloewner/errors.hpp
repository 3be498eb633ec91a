#pragma once

#include <stdexcept>
#include <string>

namespace bloewner {

/// Bad parameters or inputs violating a documented precondition.
class InvalidArgument : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// An integrator or solver could not make progress (step underflow, divergence).
class NumericalFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A configured resource cap (vertex count, replica budget, ...) was exceeded.
class CapExceeded : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace bloewner
