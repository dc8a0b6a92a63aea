// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pebble {

/// Caller broke a precondition (shape mismatch, bad id, out-of-range argument).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or infinity showed up where a finite number is required.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& where, double value)
      : std::runtime_error(where + ": non-finite value " + std::to_string(value)),
        value_(value) {}
  NumericError(const std::string& where, double value, std::size_t index)
      : std::runtime_error(where + ": non-finite value " + std::to_string(value) +
                           " at index " + std::to_string(index)),
        value_(value),
        index_(index) {}

  double value() const { return value_; }
  std::size_t index() const { return index_; }

 private:
  double value_;
  std::size_t index_ = 0;
};

/// No stored episode has enough contiguous steps for the requested window.
class NoValidSegment : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pebble
