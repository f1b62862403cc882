#pragma once

#include <stdexcept>
#include <string>

namespace gmclt {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Point outside the phase space (e.g. x = 0 for the Gauss map).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid partition symbol or state index.
class IndexError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// |t| * ||f|| above the perturbation threshold of the twisted operator.
class SmallnessViolation : public Error {
 public:
  using Error::Error;
};

class NotCentered : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DegenerateVariance : public Error {
 public:
  using Error::Error;
};

class EmptySample : public Error {
 public:
  using Error::Error;
};

class CdfUnavailable : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gmclt
