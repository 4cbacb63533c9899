#pragma once

#include <complex>
#include <span>
#include <vector>

namespace weakpred::detail {

enum class FftDirection { Forward, Backward };

/// Unnormalized DFT: out[k] = sum_j in[j] exp(-+2 pi i j k / n).
std::vector<std::complex<double>> dft(std::span<const std::complex<double>> in,
                                      FftDirection direction);

}  // namespace weakpred::detail
