#pragma once

#include <stdexcept>
#include <string>

namespace nvsim {

// Bad configuration values, files, or model parameters.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Sequence-file parse or static-validation failure, with source position.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ", col " + std::to_string(column) +
                           ": " + msg),
        line(line),
        column(column) {}
  int line;
  int column;
};

// Pulse applied in a state that cannot accept it (e.g. MW while optically excited).
class SequenceError : public std::runtime_error {
 public:
  explicit SequenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// calibrate() could not meet its targets within parameter bounds.
class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& msg, double worst_residual)
      : std::runtime_error(msg), worst_residual(worst_residual) {}
  double worst_residual;
};

// Estimator preconditions violated (empty samples, too few dwells, ...).
class EstimationError : public std::runtime_error {
 public:
  explicit EstimationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inverse line lookup hit a degenerate line.
class AmbiguityError : public std::runtime_error {
 public:
  explicit AmbiguityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Errors raised while executing a validated program (strict-mode checks etc.).
class RunError : public std::runtime_error {
 public:
  explicit RunError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nvsim
