#pragma once

#include <stdexcept>
#include <string>

namespace cubekit {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, unknown ids, invalid flags. Maps to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid kernel configuration or evaluation plan.
class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

/// A line of a record-oriented file could not be parsed.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A statistic is mathematically undefined for the given data (zero variance,
/// no pairable values).
class UndefinedStatistic : public Error {
 public:
  using Error::Error;
};

/// Kernel matrix had a clearly negative eigenvalue; indicates a bug upstream.
class NonPsdError : public Error {
 public:
  using Error::Error;
};

/// An external model client could not be reached or returned garbage.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace cubekit
