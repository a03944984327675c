#pragma once

#include <stdexcept>
#include <string>

namespace filtnet {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model dimensions or a segment/model dimension mismatch.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of an operation (gamma outside (0,1), eps <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Array lengths inconsistent with an operation (e.g. convolution input shorter than kernel).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed model or data file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Model file parsed but holds non-finite or out-of-range values.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Training data that cannot be normalized (zero variance on an axis, empty set).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values produced during a numeric computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent experiment configuration (one animal for LOAO, class-count mismatch, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Synthetic generator produced values that do not fit in 16 bits.
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace filtnet
