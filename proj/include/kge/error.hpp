#pragma once

#include <stdexcept>
#include <string>

namespace kge {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; message carries path and line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (out of range, inconsistent shapes).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A model/regularizer combination that is not defined.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace kge
