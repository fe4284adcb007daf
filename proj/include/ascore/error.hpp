#pragma once

#include <stdexcept>
#include <string>

namespace ascore {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shape or argument contract violations.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Raised by the checked-finite mode when an op produces NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

class BehindCamera : public Error {
 public:
  using Error::Error;
};

class DegenerateTriangulation : public Error {
 public:
  using Error::Error;
};

class InsufficientPoints : public Error {
 public:
  using Error::Error;
};

class NoConsensus : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ascore
