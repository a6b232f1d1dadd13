#pragma once

#include <stdexcept>
#include <string>

namespace authorgan {

/// Base of every error raised by the library. The C API maps each subclass
/// onto a distinct status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or layer extents.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Layer or process parameter rejected by its schema.
class ParamError : public Error {
 public:
  explicit ParamError(std::string key, const std::string& message)
      : Error(message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Unknown preset name.
class RegistryError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value during training, tagged with its location.
class NumericError : public Error {
 public:
  NumericError(int epoch, int step, const std::string& message)
      : Error(message), epoch_(epoch), step_(step) {}
  int epoch() const noexcept { return epoch_; }
  int step() const noexcept { return step_; }

 private:
  int epoch_;
  int step_;
};

/// Training stopped because cancellation was requested.
class CancelledError : public Error {
 public:
  CancelledError() : Error("cancelled") {}
};

}  // namespace authorgan
