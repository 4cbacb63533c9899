#pragma once

#include <stdexcept>
#include <string>

namespace weakpred {

/// Input rejected before any numerics ran (bad grid, bad parameter, bad file).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation was refused because its result would not be meaningful in
/// double precision (overflow after exponent combination, aliasing, ...).
class NumericalRejection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace weakpred
