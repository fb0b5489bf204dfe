#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hmt {

// Base class of every error raised by the library. The C API maps each
// subclass onto one hmt_status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or precondition violation.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; carries the 1-based line number where it was detected.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Failure of an orchestration stage (missing artifact, mismatched inputs).
class PipelineError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hmt
