#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcdu {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree. `operand()` names the offending input.
class DimensionError : public Error {
 public:
  DimensionError(std::string op, std::string operand, const std::string& detail)
      : Error(op + ": bad shape for '" + operand + "': " + detail),
        op_(std::move(op)),
        operand_(std::move(operand)) {}

  const std::string& op() const noexcept { return op_; }
  const std::string& operand() const noexcept { return operand_; }

 private:
  std::string op_;
  std::string operand_;
};

class ValueError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; `line()` is 1-based, 0 when the whole file is at fault.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& detail)
      : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + detail),
        source_(std::move(source)),
        line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace pcdu
