#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace msdem {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (schedule, grid, scenario, params).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A point lies outside the coarse domain and no wrap was requested.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Two floes with d <= |r_l - r_j| under strict engulfment handling.
class DegenerateContactError : public Error {
public:
  using Error::Error;
};

/// A coarse cell whose current concentration is zero cannot be rescaled.
class DegenerateCellError : public Error {
public:
  using Error::Error;
};

/// Continuum step refused because the substep violates the CFL bound.
class StabilityError : public Error {
public:
  using Error::Error;
};

/// Non-finite state detected. Carries the offending floe (or cell) index.
class DivergenceError : public Error {
public:
  DivergenceError(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

private:
  std::size_t index_;
};

} // namespace msdem
