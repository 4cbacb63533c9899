#pragma once

// Uniform-grid signals and spectra, the discrete bridge to the continuous
// Fourier transform, and the norms and weighted integrals built on it.
//
// Fourier convention (used everywhere in this library):
//
//     X(iw) = int exp(-i w t) x(t) dt,      x(t) = (1/2pi) int exp(i w t) X(iw) dw
//
// A signal on the grid t_j = t_start + j*dt (j = 0..n-1) is transformed as
//
//     X(i w_m) = dt * sum_j x_j exp(-i w_m t_j),    w_m = (m - n/2) * dw,  dw = 2pi/(n dt)
//
// so spectra are stored in ascending-frequency order starting at -pi/dt.

#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace weakpred {

using Complex = std::complex<double>;

inline constexpr std::string_view kFourierConvention =
    "X(iw)=int exp(-i*w*t)*x(t) dt; x(t)=(1/2pi) int exp(i*w*t)*X(iw) dw";

inline constexpr double kPi = 3.14159265358979323846;

/// Uniform time grid t_j = t_start + j*dt, j = 0..n-1.
class TimeGrid {
 public:
  TimeGrid(double t_start, double dt, std::size_t n);

  double t_start() const { return t_start_; }
  double dt() const { return dt_; }
  std::size_t n() const { return n_; }

  double t(std::size_t j) const { return t_start_ + static_cast<double>(j) * dt_; }
  /// One step past the last sample.
  double t_end() const { return t(n_); }
  double span() const { return static_cast<double>(n_) * dt_; }
  double nyquist() const { return kPi / dt_; }
  double d_omega() const { return 2.0 * kPi / span(); }

  /// Index of the sample sitting exactly on `t` (to 1e-9 of a step), if any.
  std::optional<std::size_t> index_of(double t) const;
  /// First index with t_j >= t (clamped to n).
  std::size_t lower_index(double t) const;

  bool same_sampling(const TimeGrid& other) const;
  bool operator==(const TimeGrid& other) const = default;

 private:
  double t_start_;
  double dt_;
  std::size_t n_;
};

/// Frequency grid implied by a time grid's (n, dt): w_m = (m - n/2) * dw.
class FrequencyGrid {
 public:
  FrequencyGrid(double dt, std::size_t n);
  explicit FrequencyGrid(const TimeGrid& grid) : FrequencyGrid(grid.dt(), grid.n()) {}

  double dt() const { return dt_; }
  std::size_t n() const { return n_; }
  double d_omega() const { return 2.0 * kPi / (static_cast<double>(n_) * dt_); }
  double nyquist() const { return kPi / dt_; }
  double omega(std::size_t m) const {
    return (static_cast<double>(m) - static_cast<double>(n_ / 2)) * d_omega();
  }
  std::size_t zero_index() const { return n_ / 2; }
  /// Index of -w_m, or nullopt for the unpaired -pi/dt bin of an even grid.
  std::optional<std::size_t> mirror(std::size_t m) const;
  /// True for the -pi/dt bin, which sits on the band edge and is excluded
  /// from band integrals.
  bool is_band_edge(std::size_t m) const { return n_ % 2 == 0 && m == 0; }

  bool operator==(const FrequencyGrid& other) const = default;

 private:
  double dt_;
  std::size_t n_;
};

class SampledSignal {
 public:
  SampledSignal(TimeGrid grid, std::vector<double> values);
  static SampledSignal zeros(const TimeGrid& grid);
  static SampledSignal sample(const TimeGrid& grid, const std::function<double(double)>& f);

  const TimeGrid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t j) const { return values_[j]; }
  std::size_t size() const { return values_.size(); }

  SampledSignal scaled(double factor) const;

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

class Spectrum {
 public:
  Spectrum(FrequencyGrid grid, std::vector<Complex> values);
  static Spectrum zeros(const FrequencyGrid& grid);
  static Spectrum sample(const FrequencyGrid& grid, const std::function<Complex(double)>& f);

  const FrequencyGrid& grid() const { return grid_; }
  std::span<const Complex> values() const { return values_; }
  Complex operator[](std::size_t m) const { return values_[m]; }
  std::size_t size() const { return values_.size(); }
  double omega(std::size_t m) const { return grid_.omega(m); }
  std::string_view convention() const { return kFourierConvention; }

  Spectrum scaled(double factor) const;
  /// Largest bin-wise relative violation of X(-iw) = conj(X(iw)).
  double hermitian_defect() const;

 private:
  FrequencyGrid grid_;
  std::vector<Complex> values_;
};

Spectrum forward_spectrum(const SampledSignal& x);

struct Inversion {
  SampledSignal signal;
  /// ||Im|| / ||result|| of the complex inverse before the real part is kept.
  double imaginary_residue;
};

inline constexpr double kMaxImaginaryResidue = 1e-8;

/// Inverse transform onto `grid`; throws NumericalRejection when the
/// imaginary residue exceeds kMaxImaginaryResidue.
Inversion inverse_transform(const Spectrum& X, const TimeGrid& grid);
SampledSignal inverse_signal(const Spectrum& X, const TimeGrid& grid);

enum class NormOrder { L1, L2, Linf };

/// Accepts "1", "2", "inf".
NormOrder parse_norm_order(std::string_view text);
std::string to_string(NormOrder r);

/// Rectangle-rule L_r norm: dt*sum|x|, sqrt(dt*sum x^2), max|x|. Overflow-safe.
double lr_norm(const SampledSignal& x, NormOrder r);
double lr_norm(std::span<const double> values, double dt, NormOrder r);

/// Rectangle-rule L_q norm of a spectrum over the grid band (q in {1,2}).
double spectrum_lq_norm(const Spectrum& X, int q);

/// log of int_{lo <= |w| < hi} exp(q T |w|) |X(iw)|^q dw, with the band edge bin
/// excluded. Per-bin exponents are combined before any exponentiation.
/// Returns -inf for an identically vanishing integrand.
double log_weighted_band(const Spectrum& X, int q, double T, double lo, double hi);

/// int_{|w| >= Omega} exp(q T |w|) |X(iw)|^q dw over the grid band. May be +inf
/// when the true value exceeds double range; use log_weighted_tail then.
double weighted_tail(const Spectrum& X, int q, double T, double Omega);
double log_weighted_tail(const Spectrum& X, int q, double T, double Omega);

inline constexpr int kMaxDerivativeOrder = 40;

/// ||d^k x/dt^k||^2_{L2} = (1/2pi) int w^{2k} |X|^2 dw.
double spectral_derivative_norm(const Spectrum& X, int k);

/// int |w|^p |X(iw)|^2 dw over the grid band.
double spectral_moment(const Spectrum& X, int p);

/// Share of the moment integral coming from the outer 5% of the band. Values
/// near 1 mean the integral is limited by the grid, not by decay of X.
double band_edge_share(const Spectrum& X, int p);

struct LeakageReport {
  double edge_energy_fraction = 0.0;
  double edge_relative_magnitude = 0.0;
  bool ok(double threshold = 1e-8) const {
    return edge_energy_fraction <= threshold && edge_relative_magnitude <= threshold;
  }
};

/// Energy and peak magnitude in the outer 5% of the window on each side,
/// relative to the whole signal.
LeakageReport support_leakage(const SampledSignal& x);

/// CSV: header `t,value`, one row per sample, 17 significant digits.
void write_signal_csv(std::ostream& out, const SampledSignal& x);
SampledSignal read_signal_csv(std::istream& in);
/// CSV: header `omega,re,im`.
void write_spectrum_csv(std::ostream& out, const Spectrum& X);
Spectrum read_spectrum_csv(std::istream& in);

/// printf("%.17g") with `inf`/`-inf`/`nan` spelled out.
std::string format_double(double v);
double parse_double(std::string_view text);

}  // namespace weakpred
