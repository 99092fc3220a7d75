#pragma once

#include <stdexcept>
#include <string>

namespace spcl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible matrix or batch shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value or configuration violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file or text.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace spcl
