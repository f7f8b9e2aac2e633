#pragma once

#include <stdexcept>
#include <string>

namespace relimu {

/// Config file problems: bad syntax, unknown keys, constraint violations.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Linear-algebra failure (singular innovation, indefinite covariance).
struct NumericalError : std::runtime_error {
  NumericalError(const std::string& msg, double condition_estimate)
      : std::runtime_error(msg), condition(condition_estimate) {}
  double condition = 0.0;
};

/// Filter produced a non-finite state.
struct RunFailedError : std::runtime_error {
  RunFailedError(const std::string& msg, int at_step)
      : std::runtime_error(msg), step(at_step) {}
  int step = -1;
};

/// Scenario/cell problems: unsupported cell, constraint-violating history.
struct ScenarioError : std::runtime_error {
  explicit ScenarioError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Replay log parse failure, carries the offending row (1-based).
struct LogParseError : std::runtime_error {
  LogParseError(const std::string& msg, int at_row)
      : std::runtime_error(msg), row(at_row) {}
  int row = -1;
};

}  // namespace relimu
