#pragma once

#include <stdexcept>
#include <string>

namespace slabflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid grid, config, or mismatched field shapes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A linear or nonlinear solve failed (singular block, divergence, iteration cap).
class SolverError : public Error {
 public:
  using Error::Error;
};

/// A run-time monitor (Jacobian floor, closeness cap, contraction) tripped.
class MonitorError : public Error {
 public:
  using Error::Error;
};

}  // namespace slabflow
