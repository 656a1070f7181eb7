#pragma once

#include <stdexcept>
#include <string>

namespace anchorvote {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class MalformedFileError : public Error {
 public:
  using Error::Error;
};

class SchemaMismatchError : public Error {
 public:
  using Error::Error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced by a tensor op, or a non-scalar loss handed to backward.
class NumericError : public Error {
 public:
  using Error::Error;
};

class UndefinedApError : public Error {
 public:
  using Error::Error;
};

}  // namespace anchorvote
