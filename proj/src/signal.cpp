#include "weakpred/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "fft.hpp"
#include "weakpred/errors.hpp"

namespace weakpred {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// exp(-i w_m t_start) with the integer part of t_start/dt reduced mod n, so a
// window far from the origin does not lose phase accuracy.
std::vector<Complex> start_phases(const FrequencyGrid& fg, double t_start, double sign) {
  const std::size_t n = fg.n();
  const double shift = t_start / fg.dt();
  const double whole = std::round(shift);
  const double frac = shift - whole;
  const auto whole_mod = static_cast<long long>(std::fmod(whole, static_cast<double>(n)));
  std::vector<Complex> out(n);
  for (std::size_t m = 0; m < n; ++m) {
    const long long k = static_cast<long long>(m) - static_cast<long long>(n / 2);
    long long cyc = (k * whole_mod) % static_cast<long long>(n);
    if (cyc < 0) cyc += static_cast<long long>(n);
    const double angle = 2.0 * kPi * static_cast<double>(cyc) / static_cast<double>(n) +
                         fg.omega(m) * frac * fg.dt();
    out[m] = std::polar(1.0, sign * angle);
  }
  return out;
}

// Log-sum-exp accumulator.
class LogSum {
 public:
  void add(double log_term) {
    if (log_term == -kInf) return;
    terms_.push_back(log_term);
    max_ = std::max(max_, log_term);
  }
  double value() const {
    if (terms_.empty()) return -kInf;
    double s = 0.0;
    for (double t : terms_) s += std::exp(t - max_);
    return max_ + std::log(s);
  }

 private:
  std::vector<double> terms_;
  double max_ = -kInf;
};

void check_q(int q) {
  if (q != 1 && q != 2) throw InvalidInput("exponent q must be 1 or 2");
}

double log_abs(Complex z) {
  const double a = std::abs(z);
  return a == 0.0 ? -kInf : std::log(a);
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Grids

TimeGrid::TimeGrid(double t_start, double dt, std::size_t n) : t_start_(t_start), dt_(dt), n_(n) {
  if (!std::isfinite(t_start)) throw InvalidInput("grid t_start must be finite");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("grid dt must be positive");
  if (n < 2) throw InvalidInput("grid needs at least 2 samples");
}

std::optional<std::size_t> TimeGrid::index_of(double t) const {
  const double r = (t - t_start_) / dt_;
  const double j = std::round(r);
  if (std::abs(r - j) > 1e-9 || j < 0.0 || j >= static_cast<double>(n_)) return std::nullopt;
  return static_cast<std::size_t>(j);
}

std::size_t TimeGrid::lower_index(double t) const {
  const double r = std::ceil((t - t_start_) / dt_ - 1e-9);
  if (r <= 0.0) return 0;
  return std::min(n_, static_cast<std::size_t>(r));
}

bool TimeGrid::same_sampling(const TimeGrid& other) const {
  return n_ == other.n_ && std::abs(dt_ - other.dt_) <= 1e-12 * dt_;
}

FrequencyGrid::FrequencyGrid(double dt, std::size_t n) : dt_(dt), n_(n) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("frequency grid dt must be positive");
  if (n < 2) throw InvalidInput("frequency grid needs at least 2 bins");
}

std::optional<std::size_t> FrequencyGrid::mirror(std::size_t m) const {
  const std::size_t twice_zero = 2 * (n_ / 2);
  if (m > twice_zero || twice_zero - m >= n_) return std::nullopt;
  return twice_zero - m;
}

// ---------------------------------------------------------------------------
// Containers

SampledSignal::SampledSignal(TimeGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.n()) throw InvalidInput("signal length does not match grid");
  if (!all_finite(values_)) throw InvalidInput("signal contains non-finite values");
}

SampledSignal SampledSignal::zeros(const TimeGrid& grid) {
  return SampledSignal(grid, std::vector<double>(grid.n(), 0.0));
}

SampledSignal SampledSignal::sample(const TimeGrid& grid, const std::function<double(double)>& f) {
  std::vector<double> v(grid.n());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = f(grid.t(j));
  return SampledSignal(grid, std::move(v));
}

SampledSignal SampledSignal::scaled(double factor) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= factor;
  return SampledSignal(grid_, std::move(v));
}

Spectrum::Spectrum(FrequencyGrid grid, std::vector<Complex> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.n()) throw InvalidInput("spectrum length does not match grid");
  for (const Complex& z : values_) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw InvalidInput("spectrum contains non-finite values");
  }
}

Spectrum Spectrum::zeros(const FrequencyGrid& grid) {
  return Spectrum(grid, std::vector<Complex>(grid.n()));
}

Spectrum Spectrum::sample(const FrequencyGrid& grid, const std::function<Complex(double)>& f) {
  std::vector<Complex> v(grid.n());
  for (std::size_t m = 0; m < v.size(); ++m) v[m] = f(grid.omega(m));
  return Spectrum(grid, std::move(v));
}

Spectrum Spectrum::scaled(double factor) const {
  std::vector<Complex> v(values_);
  for (Complex& z : v) z *= factor;
  return Spectrum(grid_, std::move(v));
}

double Spectrum::hermitian_defect() const {
  double peak = 0.0;
  for (const Complex& z : values_) peak = std::max(peak, std::abs(z));
  if (peak == 0.0) return 0.0;
  double worst = 0.0;
  for (std::size_t m = 0; m < values_.size(); ++m) {
    const auto mm = grid_.mirror(m);
    if (!mm) continue;
    worst = std::max(worst, std::abs(values_[*mm] - std::conj(values_[m])));
  }
  return worst / peak;
}

// ---------------------------------------------------------------------------
// Transforms

Spectrum forward_spectrum(const SampledSignal& x) {
  const TimeGrid& g = x.grid();
  const FrequencyGrid fg(g);
  const std::size_t n = g.n();
  std::vector<Complex> in(x.values().begin(), x.values().end());
  const auto d = detail::dft(in, detail::FftDirection::Forward);
  const auto phase = start_phases(fg, g.t_start(), -1.0);
  std::vector<Complex> out(n);
  for (std::size_t m = 0; m < n; ++m) {
    const std::size_t k = (m + n - n / 2) % n;
    out[m] = g.dt() * phase[m] * d[k];
  }
  return Spectrum(fg, std::move(out));
}

Inversion inverse_transform(const Spectrum& X, const TimeGrid& grid) {
  const FrequencyGrid& fg = X.grid();
  if (fg.n() != grid.n() || std::abs(fg.dt() - grid.dt()) > 1e-12 * grid.dt())
    throw InvalidInput("spectrum and time grid are inconsistent");
  const std::size_t n = grid.n();
  const auto phase = start_phases(fg, grid.t_start(), +1.0);
  std::vector<Complex> shifted(n);
  for (std::size_t m = 0; m < n; ++m) shifted[(m + n - n / 2) % n] = X[m] * phase[m];
  const auto d = detail::dft(shifted, detail::FftDirection::Backward);
  const double norm = 1.0 / (static_cast<double>(n) * grid.dt());

  std::vector<double> re(n);
  double peak = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    re[j] = d[j].real() * norm;
    peak = std::max({peak, std::abs(d[j].real()), std::abs(d[j].imag())});
  }
  double residue = 0.0;
  if (peak > 0.0) {
    double sr = 0.0, si = 0.0;
    for (const Complex& z : d) {
      sr += (z.real() / peak) * (z.real() / peak);
      si += (z.imag() / peak) * (z.imag() / peak);
    }
    residue = sr > 0.0 ? std::sqrt(si / sr) : (si > 0.0 ? kInf : 0.0);
  }
  if (residue > kMaxImaginaryResidue) {
    std::ostringstream msg;
    msg << "inverse transform is not real: imaginary residue " << residue << " exceeds "
        << kMaxImaginaryResidue;
    throw NumericalRejection(msg.str());
  }
  for (double v : re) {
    if (!std::isfinite(v)) throw NumericalRejection("inverse transform overflowed");
  }
  return Inversion{SampledSignal(grid, std::move(re)), residue};
}

SampledSignal inverse_signal(const Spectrum& X, const TimeGrid& grid) {
  return inverse_transform(X, grid).signal;
}

// ---------------------------------------------------------------------------
// Norms and weighted integrals

NormOrder parse_norm_order(std::string_view text) {
  if (text == "1") return NormOrder::L1;
  if (text == "2") return NormOrder::L2;
  if (text == "inf" || text == "infinity") return NormOrder::Linf;
  throw InvalidInput("norm order must be 1, 2 or inf, got '" + std::string(text) + "'");
}

std::string to_string(NormOrder r) {
  switch (r) {
    case NormOrder::L1: return "1";
    case NormOrder::L2: return "2";
    case NormOrder::Linf: return "inf";
  }
  return "?";
}

double lr_norm(std::span<const double> values, double dt, NormOrder r) {
  double peak = 0.0;
  for (double v : values) peak = std::max(peak, std::abs(v));
  if (peak == 0.0 || r == NormOrder::Linf) return peak;
  double s = 0.0;
  if (r == NormOrder::L1) {
    for (double v : values) s += std::abs(v) / peak;
    return dt * s * peak;
  }
  for (double v : values) s += (v / peak) * (v / peak);
  return std::sqrt(dt * s) * peak;
}

double lr_norm(const SampledSignal& x, NormOrder r) {
  return lr_norm(x.values(), x.grid().dt(), r);
}

double spectrum_lq_norm(const Spectrum& X, int q) {
  check_q(q);
  double peak = 0.0;
  for (const Complex& z : X.values()) peak = std::max(peak, std::abs(z));
  if (peak == 0.0) return 0.0;
  double s = 0.0;
  for (const Complex& z : X.values()) {
    const double a = std::abs(z) / peak;
    s += q == 1 ? a : a * a;
  }
  const double dw = X.grid().d_omega();
  return q == 1 ? dw * s * peak : std::sqrt(dw * s) * peak;
}

double log_weighted_band(const Spectrum& X, int q, double T, double lo, double hi) {
  check_q(q);
  if (!(T >= 0.0)) throw InvalidInput("horizon T must be nonnegative");
  if (!(lo >= 0.0)) throw InvalidInput("band lower edge must be nonnegative");
  const FrequencyGrid& fg = X.grid();
  const double log_dw = std::log(fg.d_omega());
  LogSum acc;
  for (std::size_t m = 0; m < X.size(); ++m) {
    if (fg.is_band_edge(m)) continue;
    const double w = std::abs(fg.omega(m));
    if (w < lo || w >= hi) continue;
    acc.add(q * T * w + q * log_abs(X[m]) + log_dw);
  }
  return acc.value();
}

double log_weighted_tail(const Spectrum& X, int q, double T, double Omega) {
  if (!(Omega >= 0.0)) throw InvalidInput("tail start Omega must be nonnegative");
  if (Omega >= X.grid().nyquist())
    throw InvalidInput("tail start Omega is at or beyond the grid Nyquist frequency");
  return log_weighted_band(X, q, T, Omega, kInf);
}

double weighted_tail(const Spectrum& X, int q, double T, double Omega) {
  return std::exp(log_weighted_tail(X, q, T, Omega));
}

namespace {

double log_moment(const Spectrum& X, double power, double from) {
  const FrequencyGrid& fg = X.grid();
  LogSum acc;
  for (std::size_t m = 0; m < X.size(); ++m) {
    const double w = std::abs(fg.omega(m));
    if (w < from) continue;
    const double lw = power == 0.0 ? 0.0 : power * (w == 0.0 ? -kInf : std::log(w));
    acc.add(lw + 2.0 * log_abs(X[m]));
  }
  return acc.value() + std::log(fg.d_omega());
}

}  // namespace

double spectral_derivative_norm(const Spectrum& X, int k) {
  if (k < 0 || k > kMaxDerivativeOrder)
    throw InvalidInput("derivative order must lie in [0, " + std::to_string(kMaxDerivativeOrder) +
                       "]");
  return std::exp(log_moment(X, 2.0 * k, 0.0)) / (2.0 * kPi);
}

double spectral_moment(const Spectrum& X, int p) {
  if (p < 0) throw InvalidInput("moment order must be nonnegative");
  return std::exp(log_moment(X, p, 0.0));
}

double band_edge_share(const Spectrum& X, int p) {
  const double total = log_moment(X, p, 0.0);
  if (total == -kInf) return 0.0;
  return std::exp(log_moment(X, p, 0.95 * X.grid().nyquist()) - total);
}

LeakageReport support_leakage(const SampledSignal& x) {
  const auto v = x.values();
  const std::size_t n = v.size();
  const std::size_t edge = std::max<std::size_t>(1, n / 20);
  double peak = 0.0;
  for (double a : v) peak = std::max(peak, std::abs(a));
  if (peak == 0.0) return {};
  double total = 0.0, outer = 0.0, outer_peak = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double a = v[j] / peak;
    total += a * a;
    if (j < edge || j >= n - edge) {
      outer += a * a;
      outer_peak = std::max(outer_peak, std::abs(a));
    }
  }
  return {outer / total, outer_peak};
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view text) {
  std::string s(text);
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  if (s.empty()) throw InvalidInput("expected a number, got an empty field");
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw InvalidInput("expected a number, got '" + s + "'");
  return v;
}

void write_signal_csv(std::ostream& out, const SampledSignal& x) {
  out << "t,value\n";
  for (std::size_t j = 0; j < x.size(); ++j)
    out << format_double(x.grid().t(j)) << ',' << format_double(x[j]) << '\n';
}

SampledSignal read_signal_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "t,value")
    throw InvalidInput("signal CSV must start with header 't,value'");
  std::vector<double> t, v;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv_row(line);
    if (cells.size() != 2)
      throw InvalidInput("signal CSV row " + std::to_string(row) + ": expected 2 columns");
    t.push_back(parse_double(cells[0]));
    v.push_back(parse_double(cells[1]));
  }
  if (t.size() < 2) throw InvalidInput("signal CSV needs at least 2 rows");
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  TimeGrid grid(t.front(), dt, t.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (std::abs(t[j] - grid.t(j)) > 1e-6 * dt)
      throw InvalidInput("signal CSV time column is not uniformly spaced at row " +
                         std::to_string(j + 2));
  }
  return SampledSignal(grid, std::move(v));
}

void write_spectrum_csv(std::ostream& out, const Spectrum& X) {
  out << "omega,re,im\n";
  for (std::size_t m = 0; m < X.size(); ++m)
    out << format_double(X.omega(m)) << ',' << format_double(X[m].real()) << ','
        << format_double(X[m].imag()) << '\n';
}

Spectrum read_spectrum_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "omega,re,im")
    throw InvalidInput("spectrum CSV must start with header 'omega,re,im'");
  std::vector<double> w;
  std::vector<Complex> v;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv_row(line);
    if (cells.size() != 3)
      throw InvalidInput("spectrum CSV row " + std::to_string(row) + ": expected 3 columns");
    w.push_back(parse_double(cells[0]));
    v.emplace_back(parse_double(cells[1]), parse_double(cells[2]));
  }
  if (w.size() < 2) throw InvalidInput("spectrum CSV needs at least 2 rows");
  const std::size_t n = w.size();
  const double dw = (w.back() - w.front()) / static_cast<double>(n - 1);
  const FrequencyGrid fg(2.0 * kPi / (static_cast<double>(n) * dw), n);
  for (std::size_t m = 0; m < n; ++m) {
    if (std::abs(w[m] - fg.omega(m)) > 1e-6 * dw)
      throw InvalidInput("spectrum CSV omega column does not match a centered DFT grid at row " +
                         std::to_string(m + 2));
  }
  return Spectrum(fg, std::move(v));
}

}  // namespace weakpred
