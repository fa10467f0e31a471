#pragma once

#include <stdexcept>
#include <string>

namespace gpbag {

// Caller-side mistakes: shape mismatches, out-of-range options, unusable data.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& message) : std::invalid_argument(message) {}
};

// Malformed text: kernel expressions, delimited files, model archives.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& message) : std::runtime_error(message) {}
};

// Numerical failure that survived every recovery attempt (e.g. the jitter
// ladder ran out before a Cholesky factorization succeeded).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& message) : std::runtime_error(message) {}
};

}  // namespace gpbag
