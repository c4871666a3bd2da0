#pragma once

#include <stdexcept>
#include <string>

namespace sdl {

// Shapes disagree (bin counts, matrix dimensions, weight lengths).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A domain type's invariant is violated (negative mass, non-unit sum,
// indefinite matrix, infeasible code row).
class InvariantError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller-supplied parameter is outside its admissible range.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure at runtime (non-finite objective, singular solve).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File access or parse failure; the message names the offending input.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sdl
