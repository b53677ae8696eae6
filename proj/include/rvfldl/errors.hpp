#pragma once

#include <stdexcept>
#include <string>

namespace rvfldl {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An SPD factorization failed even after jitter escalation, or a
/// solver did not converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or argument value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (datasets, model files).
class DataError : public Error {
 public:
  enum class Kind {
    kIo,
    kBadMagic,
    kTruncated,
    kCountMismatch,
    kParse,
    kDimensionMismatch,
    kVersionMismatch,
    kInvalidValue,
  };

  DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline const char* to_string(DataError::Kind kind) {
  switch (kind) {
    case DataError::Kind::kIo: return "io";
    case DataError::Kind::kBadMagic: return "bad_magic";
    case DataError::Kind::kTruncated: return "truncated";
    case DataError::Kind::kCountMismatch: return "count_mismatch";
    case DataError::Kind::kParse: return "parse";
    case DataError::Kind::kDimensionMismatch: return "dimension_mismatch";
    case DataError::Kind::kVersionMismatch: return "version_mismatch";
    case DataError::Kind::kInvalidValue: return "invalid_value";
  }
  return "unknown";
}

namespace detail {

inline std::string shape(long rows, long cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace detail
}  // namespace rvfldl
