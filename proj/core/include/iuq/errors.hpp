#pragma once

#include <stdexcept>
#include <string>

namespace iuq {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed call: wrong sizes, empty inputs, bad options.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Input lies outside a declared mathematical domain (e.g. prior support).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (factorization, non-repairable warp, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Training diverged. Carries the epoch at which it was detected.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, int epoch, double last_loss)
      : NumericError(what), epoch_(epoch), last_loss_(last_loss) {}
  int epoch() const noexcept { return epoch_; }
  double last_loss() const noexcept { return last_loss_; }

 private:
  int epoch_;
  double last_loss_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was run before the stage it depends on.
class DependencyError : public Error {
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

}  // namespace iuq
