#pragma once

#include <stdexcept>
#include <string>

namespace mfsbm {

/// Invalid argument outside an operation's stated domain (nonpositive time,
/// malformed index vector, out-of-range label, ...).
class DomainError : public std::invalid_argument {
public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure that still carries the best available answer, so callers
/// can decide whether the partial result is usable.
class NumericError : public std::runtime_error {
public:
  NumericError(const std::string& what, double best_estimate, double error_bound)
      : std::runtime_error(what), best_estimate(best_estimate), error_bound(error_bound) {}

  double best_estimate;
  double error_bound;
};

/// A configured resource limit was exceeded (population cap, enumeration cap,
/// tensor-quadrature dimension cap). The run is discarded, never silently truncated.
class CapacityError : public std::runtime_error {
public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

/// A user-supplied coefficient functional broke its declared bounds at a
/// specific evaluation node; the message names the node.
class ContractError : public std::runtime_error {
public:
  explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration rejected during parsing/validation; message lists every violation.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace mfsbm
