#pragma once

#include <stdexcept>
#include <string>

namespace mvae {

/// Caller broke a documented precondition (shapes, ranges, argument values).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A factorization hit a pivot below the singularity threshold.
class SingularityError : public std::runtime_error {
 public:
  SingularityError(const std::string& what, double log_abs_det)
      : std::runtime_error(what), log_abs_det_(log_abs_det) {}
  double log_abs_det() const noexcept { return log_abs_det_; }

 private:
  double log_abs_det_;
};

/// Malformed input file. Offset is a byte offset for binary formats and a
/// 1-based line number for text formats.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t location)
      : std::runtime_error(what), location_(location) {}
  std::size_t location() const noexcept { return location_; }

 private:
  std::size_t location_;
};

/// Non-finite values during optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or incomplete experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mvae
