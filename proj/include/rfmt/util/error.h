#pragma once

#include <stdexcept>
#include <string>

namespace rfmt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes passed to an op.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced by a forward op, or a diverging loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (corpora, configs, token ids).
class DataError : public Error {
 public:
  using Error::Error;
};

// Command-line misuse.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Training could not proceed (divergence, empty corpus after filtering).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace rfmt
