#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsgt {

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. `position` is the 1-based byte position at which
/// the parser gave up (length + 1 when the input ended early).
class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& what)
      : Error("syntax error at offset " + std::to_string(position) + ": " + what),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class UnknownIdentifier : public Error {
 public:
  explicit UnknownIdentifier(const std::string& name)
      : Error("unknown identifier '" + name + "'"), name_(name) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class UnboundVariable : public Error {
 public:
  explicit UnboundVariable(const std::string& name)
      : Error("unbound variable '" + name + "'") {}
};

/// Division by zero, log of a non-positive number and similar.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Requested value lies outside the range of a function.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent sizes or shapes between cooperating objects.
class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace hsgt
