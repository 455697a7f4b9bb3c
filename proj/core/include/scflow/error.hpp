#pragma once

#include <stdexcept>
#include <string>

namespace scflow {

/// Base of every error raised by the library. Callers that only need a
/// message can catch this; the CLI maps the concrete kinds to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad dimension, count, range).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An object was used in a state that does not permit the call
/// (empty split, stale forward cache, resume from mid-epoch).
class InvalidState : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN or infinity.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The entangler produced a zero vector that cannot be normalized.
class DegenerateEmbedding : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A persisted file failed validation. `field()` names the offending part
/// of the file (e.g. "magic", "payload", "arch.hidden_widths").
class FormatError : public Error {
 public:
  FormatError(std::string field, const std::string& detail);

  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// The file system refused an operation (missing file, unwritable path,
/// held lock).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace scflow
