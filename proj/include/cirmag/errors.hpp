#pragma once

#include <stdexcept>
#include <string>

namespace cirmag {

// Argument outside the mathematical domain of a function (a <= 0 in the
// Hurwitz zeta, closed transverse mode, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class PoleError : public DomainError {
 public:
  using DomainError::DomainError;
};

class UnsupportedError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Radial grid too coarse for the local wavelength.
class ResolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Root finder could not bracket its target on the requested branch.
class BracketingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DerivativeError : public std::runtime_error {
 public:
  DerivativeError(const std::string& what, double lo, double hi)
      : std::runtime_error(what), bracket_lo(lo), bracket_hi(hi) {}
  double bracket_lo;
  double bracket_hi;
};

// Parameter combination not estimable from the available data.
class EstimabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cirmag
