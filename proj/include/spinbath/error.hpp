#pragma once

#include <stdexcept>
#include <string>

namespace spinbath {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Operands live on spaces of different dimension.
class DimensionError : public Error {
  public:
    using Error::Error;
};

/// Invalid user-supplied parameters (lattice, couplings, config values).
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Iterative schemes that failed to converge, norm drift, NaN/Inf, order caps.
class NumericError : public Error {
  public:
    using Error::Error;
};

/// An operator couples two different magnetization sectors.
class SectorError : public Error {
  public:
    using Error::Error;
};

/// The Gaussian energy filter annihilated the state.
class EmptyWindowError : public NumericError {
  public:
    using NumericError::NumericError;
};

} // namespace spinbath
