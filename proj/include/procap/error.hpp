#pragma once

#include <stdexcept>
#include <string>

namespace procap {

// Base of everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (corpus, features, checkpoints).
class DataError : public Error {
 public:
  using Error::Error;
};

// Incompatible tensor shapes or model dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kData = 2,
  kNumerical = 3,
};

}  // namespace procap
