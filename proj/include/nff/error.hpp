#pragma once

#include <stdexcept>
#include <string>

namespace nff {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor extents.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (e.g. non-scalar loss).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finiteness was promised.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid activation / model hyperparameters.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Training hit a non-finite loss.
class NumericAbort : public Error {
 public:
  NumericAbort(const std::string& what, long long step, double lr)
      : Error(what), step_(step), lr_(lr) {}
  long long step() const noexcept { return step_; }
  double lr() const noexcept { return lr_; }

 private:
  long long step_;
  double lr_;
};

}  // namespace nff
