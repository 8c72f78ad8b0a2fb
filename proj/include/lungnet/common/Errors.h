#pragma once

#include <stdexcept>
#include <string>

namespace lungnet {

// Error taxonomy shared by all modules. Each category maps to one failure
// class named by the module contracts so callers can catch selectively.

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AnnotationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sensitivity or specificity requested for a set with no abnormal or no
/// normal cycles.
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when a WAV file name does not follow the ICBHI naming convention.
/// The offending name is kept so callers can report or fall back on it.
class MetadataError : public std::runtime_error {
 public:
  MetadataError(const std::string& what, std::string rawName)
      : std::runtime_error(what), rawName_(std::move(rawName)) {}

  const std::string& rawName() const {
    return rawName_;
  }

 private:
  std::string rawName_;
};

} // namespace lungnet
