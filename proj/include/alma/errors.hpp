#pragma once

#include <stdexcept>
#include <string>

namespace alma {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Raised for CIEDE2000/SSIM on inputs that are not (3, H, W) images.
class UnsupportedShape : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Logit vector whose ratio denominator vanishes (top and third logits tied).
class DegenerateLogits : public Error {
 public:
  using Error::Error;
};

class ZeroGradient : public Error {
 public:
  using Error::Error;
};

class TrainingFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace alma
