#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace monostage {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arguments violate a documented precondition (shape mismatch, empty
/// table, non-finite potential, label out of range).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A gold label sequence uses a transition the mask forbids. Its probability
/// is zero, so the loss would be infinite.
class ForbiddenTransition : public InvalidInput {
 public:
  ForbiddenTransition(std::size_t step, int from, int to)
      : InvalidInput("gold sequence uses forbidden transition " + std::to_string(from) + " -> " +
                     std::to_string(to) + " at step " + std::to_string(step)),
        step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Malformed or inconsistent file content.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Training or inference produced a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace monostage
