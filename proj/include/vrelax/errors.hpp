#pragma once

#include <stdexcept>
#include <string>

namespace vrelax {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// A precondition on assembled data (rate tables, bases) does not hold.
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Integration left the physically admissible region (trace drift, negativity).
class NumericalAbort : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Configuration or input-file problem; line is 0 when not line-anchored.
class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

private:
  int line_;
};

}  // namespace vrelax
