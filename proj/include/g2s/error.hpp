#pragma once

#include <stdexcept>
#include <string>

namespace g2s {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document. `location` is a JSON pointer or byte offset.
class ParseError : public Error {
public:
  ParseError(const std::string& location, const std::string& what)
      : Error(location.empty() ? what : location + ": " + what), location_(location) {}
  const std::string& location() const noexcept { return location_; }

private:
  std::string location_;
};

/// Tensor shape incompatibility inside an autodiff op.
class ShapeError : public Error {
public:
  using Error::Error;
};

}  // namespace g2s
