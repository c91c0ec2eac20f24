#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slaterank {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class RankTooLarge : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class ThetaOutOfRange : public Error {
 public:
  using Error::Error;
};

class EmptyKernel : public Error {
 public:
  using Error::Error;
};

class UnknownWidget : public Error {
 public:
  using Error::Error;
};

class NoEligibleLists : public Error {
 public:
  using Error::Error;
};

class MissingTruth : public Error {
 public:
  using Error::Error;
};

class EmptyHoldout : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment or environment configuration. The message names the field.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed input data. `line` is 1-based; 0 when not tied to a line.
class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace slaterank
