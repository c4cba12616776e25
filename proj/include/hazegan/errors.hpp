#pragma once

#include <stdexcept>
#include <string>

namespace hazegan {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad argument values supplied by the caller (CLI exit code 1).
struct InvalidParameterError : Error {
  using Error::Error;
};

// Configuration that cannot be honored (missing weights file, bad config key).
struct ConfigurationError : Error {
  using Error::Error;
};

// Problems with input data: files, datasets, checkpoints (CLI exit code 2).
struct DataError : Error {
  using Error::Error;
};

// Tensor/image shape mismatches.
struct ShapeError : DataError {
  using DataError::DataError;
};

// Corrupt or truncated serialized files.
struct IntegrityError : DataError {
  using DataError::DataError;
};

// Serialized file from an unsupported format version.
struct VersionError : DataError {
  using DataError::DataError;
};

// Checkpoint whose architecture fingerprint does not match the requested config.
struct IncompatibleCheckpointError : DataError {
  using DataError::DataError;
};

// NaN/Inf surfaced during computation (CLI exit code 3).
struct NumericError : Error {
  using Error::Error;
};

}  // namespace hazegan
