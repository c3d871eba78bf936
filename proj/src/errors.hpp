#pragma once

#include <stdexcept>
#include <string>

namespace lsfts {

// Error categories map 1:1 onto the C API status codes and the CLI exit codes.
enum class ErrorKind {
  invalid_argument,
  config,
  stability,
  boundary,
  io,
  parse,
  numeric,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::invalid_argument, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class StabilityError : public Error {
 public:
  StabilityError(const std::string& what, std::string report_json)
      : Error(ErrorKind::stability, what), report_(std::move(report_json)) {}

  // Serialized StabilityReport of the failing check.
  const std::string& report() const noexcept { return report_; }

 private:
  std::string report_;
};

class BoundaryError : public Error {
 public:
  BoundaryError(const std::string& what, double lo, double hi)
      : Error(ErrorKind::boundary, what), lo_(lo), hi_(hi) {}

  double band_lo() const noexcept { return lo_; }
  double band_hi() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line)
      : Error(ErrorKind::parse, what), line_(line) {}

  long line() const noexcept { return line_; }

 private:
  long line_;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

}  // namespace lsfts
