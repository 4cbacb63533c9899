#pragma once

// Transfer functions of the causal predictor and synthesis of the predicting
// kernel for a finite-horizon anticausal convolution.
//
// For a horizon T and tuning gamma > 0, with p = i*omega on the imaginary axis:
//
//     h(p) = -2 T p^2 / (gamma + p),        V(p) = exp(h(p)),
//     K_hat(iw) = V(iw) K(iw),              k_hat = F^{-1} K_hat.
//
// |V(iw)| can reach exp(T |w|), so spectra involving V are carried as
// log-magnitude plus phase until the final product is known to fit in a
// double.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "weakpred/signal.hpp"

namespace weakpred {

/// A bounded kernel k supported on [-T, 0], stored as samples k(-l*dt),
/// l = 0..L with L*dt = T. Integrals against it use trapezoid weights.
class HorizonKernel {
 public:
  HorizonKernel(double T, double dt, std::vector<double> samples);

  static HorizonKernel boxcar(double T, double dt, double height = 1.0);
  /// Tent on [-T, 0]: zero at both ends, 1 at -T/2.
  static HorizonKernel triangular(double T, double dt);
  static HorizonKernel from_function(double T, double dt, const std::function<double(double)>& k);

  double T() const { return T_; }
  double dt() const { return dt_; }
  /// samples()[l] = k(-l*dt).
  std::span<const double> samples() const { return samples_; }
  std::size_t taps() const { return samples_.size(); }
  double sup_bound() const { return sup_bound_; }
  double weight(std::size_t l) const;

  HorizonKernel scaled(double factor) const;

 private:
  double T_;
  double dt_;
  std::vector<double> samples_;
  double sup_bound_;
};

/// h(iw) = 2 T w^2 / (gamma + i w).
Complex eval_h(double gamma, double T, double omega);

struct TransferValue {
  Complex value;         // V(iw); may be inf when log_magnitude > ~709
  double log_magnitude;  // Re h(iw) = 2 T gamma w^2 / (gamma^2 + w^2)
  double phase;          // Im h(iw)
};

TransferValue eval_V(double gamma, double T, double omega);

/// K(iw) = int_{-T}^{0} exp(-i w t) k(t) dt by quadrature of the samples.
/// The frequency grid must not exceed the kernel's Nyquist frequency.
Spectrum kernel_spectrum(const HorizonKernel& k, const FrequencyGrid& grid);

/// Spectrum held as log|X| and arg X, for products that may leave double range.
class LogSpectrum {
 public:
  LogSpectrum(FrequencyGrid grid, std::vector<double> log_magnitude, std::vector<double> phase);
  static LogSpectrum from_spectrum(const Spectrum& X);

  const FrequencyGrid& grid() const { return grid_; }
  std::span<const double> log_magnitude() const { return log_magnitude_; }
  std::span<const double> phase() const { return phase_; }
  std::size_t size() const { return phase_.size(); }
  double max_log_magnitude() const;

  /// Bin-wise product (sum of logs, sum of phases).
  LogSpectrum times(const Spectrum& X) const;

  /// exp(log|X| - shift) * exp(i arg X).
  Spectrum scaled_down(double shift) const;
  /// Plain complex spectrum; throws NumericalRejection naming the offending
  /// bins when any magnitude exceeds double range.
  Spectrum to_spectrum() const;

 private:
  FrequencyGrid grid_;
  std::vector<double> log_magnitude_;
  std::vector<double> phase_;
};

/// Largest log-magnitude that still materializes safely after an n-point sum.
double max_representable_log(std::size_t n);

struct SynthesisOptions {
  /// Zero k_hat on t < 0 after inversion (the exact predictor is causal).
  bool zero_negative_time = true;
  /// Reject when k_hat has not decayed at the window edges.
  bool enforce_decay = true;
  double decay_threshold = 1e-6;
  /// Share of the band below Nyquist rolled off by a raised cosine before
  /// k_hat is inverted (0 disables). K_hat itself is left untouched.
  double nyquist_taper = 0.1;
};

/// The synthesized predictor: gamma, T, K_hat = V*K and the kernel k_hat on a
/// time grid. k_hat is stored as k_hat_scaled * exp(kernel_log_scale).
class PredictorSpec {
 public:
  PredictorSpec(double gamma, double T, TimeGrid grid, LogSpectrum K_hat, SampledSignal k_hat_scaled,
                double kernel_log_scale, double negative_time_energy_fraction,
                double kernel_edge_magnitude, bool zeroing_applied);

  double gamma() const { return gamma_; }
  double T() const { return T_; }
  const TimeGrid& grid() const { return grid_; }
  const LogSpectrum& K_hat() const { return K_hat_; }
  const SampledSignal& k_hat_scaled() const { return k_hat_scaled_; }
  double kernel_log_scale() const { return kernel_log_scale_; }
  /// Physical k_hat; throws NumericalRejection when it exceeds double range.
  SampledSignal k_hat() const;
  /// Energy share of k_hat at t < 0, measured before any zeroing.
  double negative_time_energy_fraction() const { return negative_time_energy_fraction_; }
  /// max |k_hat| in the outer 5% of the window relative to its peak.
  double kernel_edge_magnitude() const { return kernel_edge_magnitude_; }
  bool zeroing_applied() const { return zeroing_applied_; }

 private:
  double gamma_;
  double T_;
  TimeGrid grid_;
  LogSpectrum K_hat_;
  SampledSignal k_hat_scaled_;
  double kernel_log_scale_;
  double negative_time_energy_fraction_;
  double kernel_edge_magnitude_;
  bool zeroing_applied_;
};

/// log|K_hat| = Re h + log|K|, arg K_hat = Im h + arg K, bin by bin.
LogSpectrum predictor_log_spectrum(const Spectrum& K, double gamma, double T);

PredictorSpec synthesize(const HorizonKernel& k, double gamma, const TimeGrid& grid,
                         const SynthesisOptions& options = {});

/// Replaces V by 1: the acausal filter of the target itself. Used as the
/// gamma -> infinity reference.
PredictorSpec identity_predictor(const HorizonKernel& k, const TimeGrid& grid);

/// psi(eps) = min(1, eps/e); the accuracy margin behind gamma_for_band.
double band_margin(double epsilon);

inline constexpr double kMinGamma = 1e-6;

/// gamma = 2 T Omega^2 / psi(eps), clamped below at kMinGamma. Guarantees
/// |V(iw) - 1| <= eps for |w| <= Omega.
double gamma_for_band(double epsilon, double Omega, double T);

/// Writes <stem>_spectrum.csv, <stem>_kernel.csv and <stem>_meta.txt into dir
/// and returns the three paths.
std::vector<std::filesystem::path> write_predictor(const PredictorSpec& spec,
                                                   const std::filesystem::path& dir,
                                                   const std::string& stem);

void write_predictor_meta(std::ostream& out, const PredictorSpec& spec);

}  // namespace weakpred
