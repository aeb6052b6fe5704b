#pragma once

#include <stdexcept>
#include <string>

namespace trixlab {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or widths that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A class label or target outside {0..C-1}.
class IndexError : public Error {
 public:
  using Error::Error;
};

// API misuse: backward on a detached value, mode/target mismatch, empty batch.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input files (IDX, CSV, JSON checkpoints).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Inputs for which a statistic is undefined (all-zero features, zero baselines).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// NaN losses or non-positive class weights during training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace trixlab
