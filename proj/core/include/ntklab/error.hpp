#pragma once

#include <stdexcept>
#include <string>

namespace ntklab {

/// Base of every error raised by the library. Catch this to handle all of them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model, schedule or experiment configuration. The CLI maps it to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered, eigensolver failure, or a kernel that is not PSD.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (bad class index, truncated file).
class DataError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. a tape whose parameters were mutated after the forward pass.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A persisted file whose header does not match the version this build writes.
class VersionError : public Error {
 public:
  using Error::Error;
};

/// Similarity between kernels is undefined (one of them has zero Frobenius norm).
class UndefinedSimilarityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace ntklab
