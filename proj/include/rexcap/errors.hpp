#pragma once

#include <stdexcept>
#include <string>

namespace rexcap {

// Argument outside the mathematical domain of an operation (p < 2 for the
// standardizing constants, q outside (0,1), ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Structurally invalid call: empty matrices, malformed regimes.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Data that cannot be processed: zero pooled variance, a single observation
// when centering is requested.
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_domain(bool ok, const char* function, const std::string& what) {
  if (!ok) throw DomainError(std::string(function) + ": " + what);
}

}  // namespace detail
}  // namespace rexcap
