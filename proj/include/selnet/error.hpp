#pragma once

#include <stdexcept>
#include <string>

namespace selnet {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or layer shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation (log of a
/// non-positive value, reduction over an empty tensor, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Caller violated a precondition of an operation.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Bad dataset contents (label out of range, NaN feature, empty set).
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  using DataError::DataError;
};

/// Checkpoint payload does not match its checksum or is truncated.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint written by an incompatible format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

/// Empirical coverage reached zero so the selective risk is undefined.
class DegenerateCoverageError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// The finite-difference oracle could not be evaluated reliably.
class OracleError : public Error {
 public:
  using Error::Error;
};

}  // namespace selnet
