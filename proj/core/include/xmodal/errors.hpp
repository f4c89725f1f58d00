#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xmodal {

/// Invalid argument values or incompatible shapes.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Intensity-unit precondition violated (e.g. windowing a non-HU volume).
class UnitsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed file contents. Carries the byte offset where decoding failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Phantom geometry could not be realised from the given spec.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged or produced a non-finite quantity.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& component, const std::string& what)
      : std::runtime_error(component + ": " + what), component_(component) {}
  [[nodiscard]] const std::string& component() const noexcept { return component_; }

 private:
  std::string component_;
};

/// Bad or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Report generation failed (missing stages, empty metrics).
class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace xmodal
