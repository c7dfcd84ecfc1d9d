#pragma once

#include <stdexcept>
#include <string>

namespace sqpf {

// Problems originating in the data handed to an operation: unreadable files,
// shape mismatches, contract violations (empty masks, bad label values, ...).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerically undefined or non-finite situations: NaN inputs, zero-norm
// cosine operands, divergent training state.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sqpf
