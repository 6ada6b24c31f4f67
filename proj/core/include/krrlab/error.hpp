#pragma once

#include <stdexcept>
#include <string>

namespace krrlab {

/// Invalid user-supplied configuration. `field()` names the offending entry.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A numerical routine could not produce a trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An exact enumeration would exceed its configured budget.
class BudgetError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace krrlab
