#pragma once

#include <stdexcept>
#include <string>

namespace pdflow {

/// Base class for every error raised by pdflow.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: negative weights, self-loops, bad dimensions, bad gains.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Null space of the transposed Laplacian is not one-dimensional.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Global cost is not strongly convex (mu <= 1e-12).
class NonConvexError : public Error {
 public:
  using Error::Error;
};

/// alpha^2 <= 4 beta: no (P, M) pair can be built.
class GainConditionError : public Error {
 public:
  using Error::Error;
};

/// alpha p2 - beta != p1.
class TieConstraintError : public Error {
 public:
  using Error::Error;
};

class IterationLimitError : public Error {
 public:
  using Error::Error;
};

/// Storage never entered the fitting window.
class FitWindowError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or inconsistent configuration / input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pdflow
