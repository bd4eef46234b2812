#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace groomrisk {

/// Raised when an operation is called with arguments outside its contract
/// (bad sigma, empty batch, window size < 1, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed input data. Carries the 1-based line number of the
/// offending record when the data came from a line-delimited file (0 if unknown).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace groomrisk
