#pragma once

#include <stdexcept>
#include <string>

namespace morseflow {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown chart id, unknown built-in name, malformed parameter table.
class DescriptorError : public Error {
 public:
  using Error::Error;
};

/// A point or parameter lies outside the domain of a chart or map.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A requested level coincides with a critical value.
class LevelError : public Error {
 public:
  using Error::Error;
};

/// Internal cross-check failed (duplicate detection, poset cycle, ...).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Requested combination is outside what the numerical machinery supports.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration (for example overlapping dwell balls).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Required input (for example a signed count) is missing.
class IncompleteInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace morseflow
