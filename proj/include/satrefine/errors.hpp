#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace satrefine {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or image extents do not conform for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormatError : public Error {
 public:
  using Error::Error;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

/// Non-finite input to one of the adversarial losses.
class LossError : public Error {
 public:
  using Error::Error;
};

/// Raised when training produces a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  enum class Kind { bad_magic, bad_version, corrupt, shape_mismatch };

  CheckpointError(Kind kind, const std::string& what)
      : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class FeatFileError : public Error {
 public:
  enum class Kind { bad_magic, bad_version, truncated };

  FeatFileError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace satrefine
