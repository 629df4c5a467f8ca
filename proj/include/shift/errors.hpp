#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace shift {

// Base for everything thrown by this library. Catching shift::Error at the CLI
// boundary is enough to turn any internal failure into a clean exit message.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct StateError : Error {
  using Error::Error;
};
struct NotAValidRender : Error {
  using Error::Error;
};
struct CapacityError : Error {
  using Error::Error;
};
struct ConvergenceError : Error {
  using Error::Error;
};
struct NumericsError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct WarmupError : Error {
  using Error::Error;
};
struct DegenerateStatsError : Error {
  using Error::Error;
};
struct InsufficientDataError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

// Thrown when a training run ends below its required quality bar. Carries the
// learning curve so callers can log or plot what happened.
struct TrainingError : Error {
  std::vector<double> curve;
  TrainingError(const std::string& msg, std::vector<double> c)
      : Error(msg), curve(std::move(c)) {}
};

}  // namespace shift
