#include "weakpred/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "fft.hpp"
#include "weakpred/errors.hpp"

namespace weakpred {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kE = 2.71828182845904523536;

void check_transfer_args(double gamma, double T) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("gamma must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidInput("horizon T must be positive");
}

std::size_t taps_for(double T, double dt) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidInput("horizon T must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("kernel dt must be positive");
  const double steps = T / dt;
  const double L = std::round(steps);
  if (L < 1.0 || std::abs(steps - L) > 1e-9 * std::max(1.0, steps))
    throw InvalidInput("horizon T must be a positive integer multiple of dt");
  return static_cast<std::size_t>(L) + 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// HorizonKernel

HorizonKernel::HorizonKernel(double T, double dt, std::vector<double> samples)
    : T_(T), dt_(dt), samples_(std::move(samples)), sup_bound_(0.0) {
  if (samples_.size() != taps_for(T, dt))
    throw InvalidInput("kernel needs round(T/dt)+1 samples covering [-T, 0]");
  for (double v : samples_) {
    if (!std::isfinite(v)) throw InvalidInput("kernel samples must be finite");
    sup_bound_ = std::max(sup_bound_, std::abs(v));
  }
}

HorizonKernel HorizonKernel::boxcar(double T, double dt, double height) {
  return HorizonKernel(T, dt, std::vector<double>(taps_for(T, dt), height));
}

HorizonKernel HorizonKernel::triangular(double T, double dt) {
  return from_function(T, dt, [T](double t) { return 1.0 - std::abs(2.0 * t / T + 1.0); });
}

HorizonKernel HorizonKernel::from_function(double T, double dt,
                                           const std::function<double(double)>& k) {
  std::vector<double> s(taps_for(T, dt));
  for (std::size_t l = 0; l < s.size(); ++l) s[l] = k(-static_cast<double>(l) * dt);
  return HorizonKernel(T, dt, std::move(s));
}

double HorizonKernel::weight(std::size_t l) const {
  return (l == 0 || l + 1 == samples_.size()) ? 0.5 * dt_ : dt_;
}

HorizonKernel HorizonKernel::scaled(double factor) const {
  std::vector<double> s(samples_);
  for (double& v : s) v *= factor;
  return HorizonKernel(T_, dt_, std::move(s));
}

// ---------------------------------------------------------------------------
// Transfer functions

Complex eval_h(double gamma, double T, double omega) {
  check_transfer_args(gamma, T);
  // 2 T w^2 / (gamma + i w) = 2 T w^2 (gamma - i w) / (gamma^2 + w^2)
  const double w2 = omega * omega;
  const double den = gamma * gamma + w2;
  if (w2 == 0.0) return {0.0, 0.0};
  return {2.0 * T * gamma * w2 / den, -2.0 * T * w2 * omega / den};
}

TransferValue eval_V(double gamma, double T, double omega) {
  const Complex h = eval_h(gamma, T, omega);
  return {std::polar(std::exp(h.real()), h.imag()), h.real(), h.imag()};
}

Spectrum kernel_spectrum(const HorizonKernel& k, const FrequencyGrid& grid) {
  if (grid.dt() < k.dt() * (1.0 - 1e-12))
    throw InvalidInput("frequency grid extends beyond the kernel's Nyquist frequency");
  const std::size_t n = grid.n();
  const std::size_t L = k.taps();
  std::vector<Complex> out(n);
  const bool same_step = std::abs(grid.dt() - k.dt()) <= 1e-12 * k.dt();
  if (same_step && L <= n) {
    // Sample at t = -l dt lands at circular index n - l.
    std::vector<Complex> b(n);
    for (std::size_t l = 0; l < L; ++l) b[(n - l) % n] += k.weight(l) * k.samples()[l];
    const auto d = detail::dft(b, detail::FftDirection::Forward);
    for (std::size_t m = 0; m < n; ++m) out[m] = d[(m + n - n / 2) % n];
  } else {
    for (std::size_t m = 0; m < n; ++m) {
      const double w = grid.omega(m);
      Complex acc{};
      for (std::size_t l = 0; l < L; ++l)
        acc += k.weight(l) * k.samples()[l] * std::polar(1.0, w * static_cast<double>(l) * k.dt());
      out[m] = acc;
    }
  }
  const double bound = k.T() * k.sup_bound() * (1.0 + 1e-12) + 1e-300;
  for (std::size_t m = 0; m < n; ++m) {
    if (std::abs(out[m]) > bound) {
      std::ostringstream msg;
      msg << "kernel spectrum violates |K| <= T*sup|k| at omega=" << grid.omega(m);
      throw NumericalRejection(msg.str());
    }
  }
  return Spectrum(grid, std::move(out));
}

// ---------------------------------------------------------------------------
// LogSpectrum

LogSpectrum::LogSpectrum(FrequencyGrid grid, std::vector<double> log_magnitude,
                         std::vector<double> phase)
    : grid_(grid), log_magnitude_(std::move(log_magnitude)), phase_(std::move(phase)) {
  if (log_magnitude_.size() != grid_.n() || phase_.size() != grid_.n())
    throw InvalidInput("log spectrum length does not match grid");
  for (std::size_t m = 0; m < phase_.size(); ++m) {
    if (std::isnan(log_magnitude_[m]) || log_magnitude_[m] == kInf || !std::isfinite(phase_[m]))
      throw NumericalRejection("log spectrum contains invalid entries");
  }
}

LogSpectrum LogSpectrum::from_spectrum(const Spectrum& X) {
  std::vector<double> lm(X.size()), ph(X.size());
  for (std::size_t m = 0; m < X.size(); ++m) {
    const double a = std::abs(X[m]);
    lm[m] = a == 0.0 ? -kInf : std::log(a);
    ph[m] = a == 0.0 ? 0.0 : std::arg(X[m]);
  }
  return LogSpectrum(X.grid(), std::move(lm), std::move(ph));
}

double LogSpectrum::max_log_magnitude() const {
  double mx = -kInf;
  for (double v : log_magnitude_) mx = std::max(mx, v);
  return mx;
}

LogSpectrum LogSpectrum::times(const Spectrum& X) const {
  if (!(X.grid() == grid_)) throw InvalidInput("spectra live on different frequency grids");
  std::vector<double> lm(log_magnitude_), ph(phase_);
  for (std::size_t m = 0; m < lm.size(); ++m) {
    const double a = std::abs(X[m]);
    if (a == 0.0 || lm[m] == -kInf) {
      lm[m] = -kInf;
      ph[m] = 0.0;
    } else {
      lm[m] += std::log(a);
      ph[m] += std::arg(X[m]);
    }
  }
  return LogSpectrum(grid_, std::move(lm), std::move(ph));
}

Spectrum LogSpectrum::scaled_down(double shift) const {
  std::vector<Complex> v(size());
  for (std::size_t m = 0; m < v.size(); ++m) {
    if (log_magnitude_[m] == -kInf) continue;
    v[m] = std::polar(std::exp(log_magnitude_[m] - shift), phase_[m]);
  }
  return Spectrum(grid_, std::move(v));
}

double max_representable_log(std::size_t n) {
  return std::log(std::numeric_limits<double>::max()) - std::log(static_cast<double>(n)) - 1.0;
}

Spectrum LogSpectrum::to_spectrum() const {
  const double limit = max_representable_log(size());
  std::vector<std::size_t> bad;
  for (std::size_t m = 0; m < size(); ++m)
    if (log_magnitude_[m] > limit) bad.push_back(m);
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << bad.size() << " bin(s) exceed double range after exponent combination (limit log|X| = "
        << limit << "); first at omega=" << grid_.omega(bad.front())
        << " log|X|=" << log_magnitude_[bad.front()] << ", last at omega="
        << grid_.omega(bad.back()) << " log|X|=" << log_magnitude_[bad.back()];
    throw NumericalRejection(msg.str());
  }
  return scaled_down(0.0);
}

// ---------------------------------------------------------------------------
// PredictorSpec

PredictorSpec::PredictorSpec(double gamma, double T, TimeGrid grid, LogSpectrum K_hat,
                             SampledSignal k_hat_scaled, double kernel_log_scale,
                             double negative_time_energy_fraction, double kernel_edge_magnitude,
                             bool zeroing_applied)
    : gamma_(gamma),
      T_(T),
      grid_(grid),
      K_hat_(std::move(K_hat)),
      k_hat_scaled_(std::move(k_hat_scaled)),
      kernel_log_scale_(kernel_log_scale),
      negative_time_energy_fraction_(negative_time_energy_fraction),
      kernel_edge_magnitude_(kernel_edge_magnitude),
      zeroing_applied_(zeroing_applied) {
  if (!(negative_time_energy_fraction_ >= 0.0 && negative_time_energy_fraction_ <= 1.0))
    throw NumericalRejection("negative-time energy fraction outside [0, 1]");
}

SampledSignal PredictorSpec::k_hat() const {
  if (kernel_log_scale_ > max_representable_log(1))
    throw NumericalRejection("k_hat magnitude exp(" + std::to_string(kernel_log_scale_) +
                             ") exceeds double range");
  return k_hat_scaled_.scaled(std::exp(kernel_log_scale_));
}

LogSpectrum predictor_log_spectrum(const Spectrum& K, double gamma, double T) {
  check_transfer_args(gamma, T);
  const FrequencyGrid& fg = K.grid();
  std::vector<double> lm(K.size()), ph(K.size());
  for (std::size_t m = 0; m < K.size(); ++m) {
    const double a = std::abs(K[m]);
    if (a == 0.0) {
      lm[m] = -kInf;
      ph[m] = 0.0;
      continue;
    }
    const Complex h = eval_h(gamma, T, fg.omega(m));
    lm[m] = h.real() + std::log(a);
    ph[m] = h.imag() + std::arg(K[m]);
  }
  return LogSpectrum(fg, std::move(lm), std::move(ph));
}

namespace {

PredictorSpec assemble(double gamma, double T, const TimeGrid& grid, LogSpectrum K_hat,
                       const SynthesisOptions& options) {
  const double shift = std::max(0.0, K_hat.max_log_magnitude());
  const double log_scale = K_hat.max_log_magnitude() == -kInf ? 0.0 : shift;
  // |K_hat| need not decay before Nyquist; a hard band edge rings as 1/t and
  // leaks mass onto t < 0, so the top of the band is rolled off first.
  Spectrum S = K_hat.scaled_down(log_scale);
  if (options.nyquist_taper > 0.0) {
    const double nyq = S.grid().nyquist();
    const double knee = (1.0 - options.nyquist_taper) * nyq;
    std::vector<Complex> tapered(S.values().begin(), S.values().end());
    for (std::size_t m = 0; m < tapered.size(); ++m) {
      const double w = std::abs(S.omega(m));
      if (w > knee) tapered[m] *= 0.5 * (1.0 + std::cos(kPi * std::min(1.0, (w - knee) / (nyq - knee))));
    }
    S = Spectrum(S.grid(), std::move(tapered));
  }
  const Inversion inv = inverse_transform(S, grid);
  std::vector<double> v(inv.signal.values().begin(), inv.signal.values().end());

  double peak = 0.0;
  for (double a : v) peak = std::max(peak, std::abs(a));
  double total = 0.0, negative = 0.0;
  if (peak > 0.0) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double a = v[j] / peak;
      total += a * a;
      if (grid.t(j) < 0.0) negative += a * a;
    }
  }
  const double fraction = total > 0.0 ? negative / total : 0.0;
  const double edge = support_leakage(inv.signal).edge_relative_magnitude;
  if (options.enforce_decay && edge > options.decay_threshold) {
    std::ostringstream msg;
    msg << "k_hat has not decayed at the window edges (relative edge magnitude " << edge
        << " > " << options.decay_threshold << "); widen the grid";
    throw NumericalRejection(msg.str());
  }
  if (options.zero_negative_time) {
    for (std::size_t j = 0; j < v.size(); ++j)
      if (grid.t(j) < 0.0) v[j] = 0.0;
  }
  return PredictorSpec(gamma, T, grid, std::move(K_hat), SampledSignal(grid, std::move(v)),
                       log_scale, fraction, edge, options.zero_negative_time);
}

}  // namespace

PredictorSpec synthesize(const HorizonKernel& k, double gamma, const TimeGrid& grid,
                         const SynthesisOptions& options) {
  check_transfer_args(gamma, k.T());
  if (!(grid.t_start() < 0.0 && grid.t_end() > 0.0))
    throw InvalidInput("synthesis grid must straddle t = 0");
  const Spectrum K = kernel_spectrum(k, FrequencyGrid(grid));
  return assemble(gamma, k.T(), grid, predictor_log_spectrum(K, gamma, k.T()), options);
}

PredictorSpec identity_predictor(const HorizonKernel& k, const TimeGrid& grid) {
  const Spectrum K = kernel_spectrum(k, FrequencyGrid(grid));
  SynthesisOptions opts;
  opts.zero_negative_time = false;
  opts.enforce_decay = false;
  return assemble(kInf, k.T(), grid, LogSpectrum::from_spectrum(K), opts);
}

double band_margin(double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidInput("accuracy epsilon must be positive");
  return std::min(1.0, epsilon / kE);
}

double gamma_for_band(double epsilon, double Omega, double T) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw InvalidInput("accuracy epsilon must lie in (0, 1)");
  if (!(Omega > 0.0) || !std::isfinite(Omega)) throw InvalidInput("band edge Omega must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw InvalidInput("horizon T must be positive");
  return std::max(kMinGamma, 2.0 * T * Omega * Omega / band_margin(epsilon));
}

// ---------------------------------------------------------------------------
// Serialization

void write_predictor_meta(std::ostream& out, const PredictorSpec& spec) {
  out << "gamma=" << format_double(spec.gamma()) << '\n'
      << "T=" << format_double(spec.T()) << '\n'
      << "negative_time_energy_fraction=" << format_double(spec.negative_time_energy_fraction())
      << '\n'
      << "causal_zeroing=" << (spec.zeroing_applied() ? "true" : "false") << '\n'
      << "kernel_edge_magnitude=" << format_double(spec.kernel_edge_magnitude()) << '\n'
      << "grid.t_start=" << format_double(spec.grid().t_start()) << '\n'
      << "grid.dt=" << format_double(spec.grid().dt()) << '\n'
      << "grid.n=" << spec.grid().n() << '\n';
}

std::vector<std::filesystem::path> write_predictor(const PredictorSpec& spec,
                                                   const std::filesystem::path& dir,
                                                   const std::string& stem) {
  // Materialize first so nothing is written when the predictor cannot be.
  const Spectrum K_hat = spec.K_hat().to_spectrum();
  const SampledSignal k_hat = spec.k_hat();
  std::filesystem::create_directories(dir);
  const std::vector<std::filesystem::path> paths{dir / (stem + "_spectrum.csv"),
                                                 dir / (stem + "_kernel.csv"),
                                                 dir / (stem + "_meta.txt")};
  {
    std::ofstream out(paths[0]);
    write_spectrum_csv(out, K_hat);
  }
  {
    std::ofstream out(paths[1]);
    write_signal_csv(out, k_hat);
  }
  {
    std::ofstream out(paths[2]);
    write_predictor_meta(out, spec);
  }
  return paths;
}

}  // namespace weakpred
