#pragma once

#include <stdexcept>
#include <string>

namespace lipcert {

/// Base for every error raised by the library. CLI front-ends map
/// `InvalidInput` subclasses to exit code 1 and `NumericFailure` to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class NumericFailure : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class DimensionMismatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class CertificationRefused : public InvalidInput {
 public:
  CertificationRefused(std::size_t layer, const std::string& what)
      : InvalidInput("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}

  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

class DepthTooShallow : public InvalidInput {
 public:
  DepthTooShallow(int depth, int required)
      : InvalidInput("depth " + std::to_string(depth) + " is below the required K >= " +
                     std::to_string(required)),
        required_(required) {}

  int required() const { return required_; }

 private:
  int required_;
};

class CellCountOverflow : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class DegeneratePoint : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class ResolutionTooCoarse : public NumericFailure {
 public:
  using NumericFailure::NumericFailure;
};

class NonFiniteValue : public NumericFailure {
 public:
  using NumericFailure::NumericFailure;
};

}  // namespace lipcert
