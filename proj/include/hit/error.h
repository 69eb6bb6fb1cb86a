#pragma once

#include <stdexcept>
#include <string>

namespace hit {

// Every failure the library raises derives from Error so callers (the CLI in
// particular) can map error classes onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or length disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (non-scalar loss, bad argument).
class ContractError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced by a forward primitive or an optimizer step.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Schema file, CSV header or feature ids do not conform.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Row-level problem in a data file; carries the 1-based line number.
class DataError : public Error {
 public:
  DataError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Strict configuration parsing; the message starts with the offending key path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// AUC (or another metric) is undefined for the given input.
class MetricError : public Error {
 public:
  using Error::Error;
};

// Training loss became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Cache and checkpoint disagree, or a cache file is malformed.
class ServingError : public Error {
 public:
  using Error::Error;
};

}  // namespace hit
