#pragma once

#include <stdexcept>
#include <string>

namespace psevis {

/// Malformed or empty input text (corpus files, sentences, lexicons).
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A tensor or vector does not have the dimensions an operation expects.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimization produced a non-finite loss or parameter.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Invalid configuration values or unreadable configuration files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structured file (model, probe bundle, table) could not be parsed.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace psevis
