#pragma once

#include <stdexcept>
#include <string>

namespace wrapsim {

/// Base class for every error raised by the simulator libraries.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric argument is outside its legal domain (NaN, non-positive, ...).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Input data is structurally unusable (empty demonstration set, bad file).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Objects were wired together inconsistently (missing channel, no source).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Operation is not legal in the current lifecycle state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Gradient training diverged.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Data carries no information about the quantity asked for.
class Degenerate : public Error {
 public:
  using Error::Error;
};

/// Psychometric data carries no information about the slope.
class FitDegenerate : public Degenerate {
 public:
  using Degenerate::Degenerate;
};

/// A named task, session or experiment does not exist.
class NotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace wrapsim
