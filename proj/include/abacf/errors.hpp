#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace abacf {

// Base of every error raised by the library. Callers that only care about
// "did it work" catch this; the subclasses say which contract was broken.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Grid / tensor dimensions disagree with each other or with a declared shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A numeric parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Bad caller-supplied data (empty frame, patch too small, box outside frame).
class InputError : public Error {
 public:
  using Error::Error;
};

// An operation was called on an object in the wrong state.
class StateError : public Error {
 public:
  using Error::Error;
};

// Feature-server connection, framing, or payload failures.
class TransportError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; carries the offending 1-based line number (0 when the
// problem is not tied to one line).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace abacf
