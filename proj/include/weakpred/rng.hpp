#pragma once

#include <cstdint>

namespace weakpred {

/// Counter-based generator: draw i of stream s under seed k is a pure function
/// mix(k, s, i), so any draw can be replayed without replaying its predecessors.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t at(std::uint64_t index) const;
  std::uint64_t next() { return at(counter_++); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace weakpred
