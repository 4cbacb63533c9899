#include "weakpred/processes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "weakpred/errors.hpp"
#include "weakpred/rng.hpp"

namespace weakpred {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double relative_l2(const Spectrum& a, const Spectrum& b) {
  double peak = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) peak = std::max({peak, std::abs(a[m]), std::abs(b[m])});
  if (peak == 0.0) return 0.0;
  double num = 0.0, den = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    num += std::norm((a[m] - b[m]) / peak);
    den += std::norm(b[m] / peak);
  }
  return den > 0.0 ? std::sqrt(num / den) : kInf;
}

// log(n!) via lgamma.
double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

}  // namespace

// ---------------------------------------------------------------------------
// Parameter types

void GaussianMixtureParams::validate() const {
  if (terms.empty()) throw InvalidInput("a Gaussian mixture needs at least one term");
  for (const auto& t : terms) {
    if (!std::isfinite(t.c) || !std::isfinite(t.a) || !std::isfinite(t.v))
      throw InvalidInput("Gaussian mixture parameters must be finite");
    if (!(t.v > 0.0)) throw InvalidInput("Gaussian widths v_m must be positive");
  }
}

void FamilyBounds::validate() const {
  if (!(C1 >= 1.0)) throw InvalidInput("family bound C1 (max N) must be at least 1");
  if (!(C2 >= 0.0)) throw InvalidInput("family bound C2 (max |c|) must be nonnegative");
  if (!(C3 > 0.0)) throw InvalidInput("family bound C3 (min v) must be positive");
  if (!(C4 >= 0.0)) throw InvalidInput("family bound C4 (max |a|) must be nonnegative");
  if (!(width_span >= 1.0)) throw InvalidInput("family width span must be at least 1");
}

bool FamilyBounds::contains(const GaussianMixtureParams& p) const {
  if (p.terms.empty() || static_cast<double>(p.N()) > C1) return false;
  return std::all_of(p.terms.begin(), p.terms.end(), [this](const GaussianTerm& t) {
    return std::abs(t.c) <= C2 && t.v >= C3 && std::abs(t.a) <= C4;
  });
}

Spectrum Process::spectrum() const {
  return exact_spectrum ? *exact_spectrum : forward_spectrum(signal);
}

Process Process::scaled(double factor) const {
  Process p{id, signal.scaled(factor), std::nullopt};
  if (exact_spectrum) p.exact_spectrum = exact_spectrum->scaled(factor);
  return p;
}

// ---------------------------------------------------------------------------
// Generators

Spectrum gaussian_mixture_spectrum(const GaussianMixtureParams& params, const FrequencyGrid& grid) {
  params.validate();
  return Spectrum::sample(grid, [&](double w) {
    Complex acc{};
    for (const auto& t : params.terms)
      acc += t.c * std::sqrt(kPi * t.v) * std::exp(-t.v * w * w / 4.0) * std::polar(1.0, -w * t.a);
    return acc;
  });
}

Process gaussian_mixture(const GaussianMixtureParams& params, const TimeGrid& grid) {
  params.validate();
  const double last = grid.t(grid.n() - 1);
  for (const auto& t : params.terms) {
    const double margin = kGaussianMargin * std::sqrt(t.v);
    if (t.a - margin < grid.t_start() || t.a + margin > last) {
      std::ostringstream msg;
      msg << "Gaussian term centered at " << t.a << " with v=" << t.v
          << " needs the grid to cover [" << t.a - margin << ", " << t.a + margin << "]";
      throw InvalidInput(msg.str());
    }
  }
  auto signal = SampledSignal::sample(grid, [&](double s) {
    double acc = 0.0;
    for (const auto& t : params.terms) acc += t.c * std::exp(-(s - t.a) * (s - t.a) / t.v);
    return acc;
  });
  Spectrum exact = gaussian_mixture_spectrum(params, FrequencyGrid(grid));
  const double mismatch = relative_l2(forward_spectrum(signal), exact);
  if (mismatch > 1e-8) {
    std::ostringstream msg;
    msg << "sampled mixture is aliased on this grid: DFT and closed-form spectra differ by "
        << mismatch << " relative L2; reduce dt";
    throw NumericalRejection(msg.str());
  }
  return Process{"gaussian_mixture", std::move(signal), std::move(exact)};
}

Process gaussian_filter_output(const std::vector<Impulse>& impulses, double c, double v,
                               const TimeGrid& grid, double v_min) {
  if (!(v > 0.0) || v < v_min)
    throw InvalidInput("Gaussian filter width v must be positive and at least v_min");
  if (impulses.empty()) {
    return Process{"gaussian_filter", SampledSignal::zeros(grid), Spectrum::zeros(FrequencyGrid(grid))};
  }
  GaussianMixtureParams params;
  for (const auto& imp : impulses) params.terms.push_back({imp.weight * c, imp.location, v});
  Process p = gaussian_mixture(params, grid);
  p.id = "gaussian_filter";
  return p;
}

Process band_limited_process(double Omega, std::uint64_t seed, const TimeGrid& grid,
                             double amplitude, int components) {
  const FrequencyGrid fg(grid);
  if (!(Omega > 0.0) || Omega >= fg.nyquist() / 4.0)
    throw InvalidInput("band edge Omega must lie in (0, nyquist/4) for this grid");
  if (Omega < 4.0 * fg.d_omega())
    throw InvalidInput("band edge Omega spans fewer than 4 frequency bins; lengthen the grid");
  if (components < 1) throw InvalidInput("band-limited process needs at least one component");
  CounterRng rng(seed, 0xb1);
  const double center = grid.t_start() + 0.5 * grid.span();
  std::vector<std::pair<double, double>> ramps;  // (weight, delay)
  for (int j = 0; j < components; ++j) {
    const double weight = amplitude * rng.uniform(-1.0, 1.0);
    const double delay = center + rng.uniform(-0.125, 0.125) * grid.span();
    ramps.emplace_back(weight, delay);
  }
  Spectrum X = Spectrum::sample(fg, [&](double w) {
    if (std::abs(w) >= Omega) return Complex{};
    const double c = std::cos(kPi * w / (2.0 * Omega));
    Complex acc{};
    for (const auto& [weight, delay] : ramps) acc += weight * std::polar(1.0, -w * delay);
    return c * c * acc;
  });
  SampledSignal x = inverse_signal(X, grid);
  return Process{"band_limited", std::move(x), std::move(X)};
}

Process counterexample_te(int sign_index, const TimeGrid& grid) {
  if (sign_index != 1 && sign_index != 2) throw InvalidInput("counterexample sign index must be 1 or 2");
  if (grid.t_start() > 0.0) throw InvalidInput("counterexample grid must start at t <= 0");
  const double sign = sign_index == 1 ? -1.0 : 1.0;
  auto x = SampledSignal::sample(grid, [sign](double t) { return t > 0.0 ? sign * t * std::exp(-t) : 0.0; });
  Spectrum X = Spectrum::sample(FrequencyGrid(grid), [sign](double w) {
    const Complex d(1.0, w);
    return sign / (d * d);
  });
  return Process{"counterexample_te", std::move(x), std::move(X)};
}

// ---------------------------------------------------------------------------
// Membership estimators

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Member: return "member";
    case Verdict::Divergent: return "divergent";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

std::string to_string(ClassTag c) {
  switch (c) {
    case ClassTag::X_qT: return "X_qT";
    case ClassTag::M_C: return "M_C";
    case ClassTag::N_C: return "N_C";
  }
  return "?";
}

std::vector<double> default_omega_list(int q, double T, const FrequencyGrid& grid) {
  if (q != 1 && q != 2) throw InvalidInput("exponent q must be 1 or 2");
  if (!(T > 0.0)) throw InvalidInput("horizon T must be positive");
  const double top = 0.9 * grid.nyquist();
  const double step = std::min(std::log(100.0) / (q * T), top / 8.0);
  std::vector<double> out;
  for (int i = 0; i < 40 && i * step < top; ++i) out.push_back(i * step);
  return out;
}

MembershipReport membership_x(const Spectrum& X, int q, double T, const std::vector<double>& omegas) {
  if (omegas.size() < 4) throw InvalidInput("membership_x needs at least 4 tail start points");
  for (std::size_t i = 1; i < omegas.size(); ++i)
    if (!(omegas[i] > omegas[i - 1])) throw InvalidInput("tail start points must be increasing");

  MembershipReport r;
  r.class_tag = ClassTag::X_qT;
  r.q = q;
  r.T = T;
  for (double w : omegas) {
    const double lv = log_weighted_tail(X, q, T, w);
    r.tail_curve.push_back({w, std::exp(lv), lv});
  }
  for (std::size_t i = 0; i + 1 < omegas.size(); ++i)
    r.log_band_integrals.push_back(log_weighted_band(X, q, T, omegas[i], omegas[i + 1]));

  const double growth = std::log(kDivergentBandGrowth);
  int run = 0;
  for (std::size_t i = 1; i < r.log_band_integrals.size(); ++i) {
    const double prev = r.log_band_integrals[i - 1];
    const double cur = r.log_band_integrals[i];
    run = (prev > -kInf && cur - prev >= growth) ? run + 1 : 0;
    if (run >= kDivergentBandRuns) {
      r.verdict = Verdict::Divergent;
      std::ostringstream msg;
      msg << "weighted band integrals grew >= " << kDivergentBandGrowth << "x over "
          << kDivergentBandRuns << " consecutive bands ending at omega=" << omegas[i + 1];
      r.reason = msg.str();
      return r;
    }
  }

  const double first = r.tail_curve.front().log_value;
  const double last = r.tail_curve.back().log_value;
  bool monotone = true;
  for (std::size_t i = 1; i < r.tail_curve.size(); ++i)
    if (r.tail_curve[i].log_value > r.tail_curve[i - 1].log_value) monotone = false;
  if (first == -kInf) {
    r.verdict = Verdict::Member;
    r.reason = "weighted tail vanishes identically";
  } else if (monotone && last - first < std::log(kMemberTailRatio)) {
    r.verdict = Verdict::Member;
    std::ostringstream msg;
    msg << "weighted tail fell by a factor " << std::exp(first - last) << " by omega="
        << r.tail_curve.back().omega;
    r.reason = msg.str();
  } else {
    r.verdict = Verdict::Inconclusive;
    r.reason = "weighted tail neither decayed below the member threshold nor grew geometrically";
  }
  return r;
}

namespace {

// log bound factor for order k: k log C (M_C) or log k! - k log C (N_C).
MembershipReport derivative_membership(const Spectrum& X, double C, int k_max, ClassTag tag) {
  if (!(C > 0.0) || !std::isfinite(C)) throw InvalidInput("rate bound C must be positive");
  if (k_max < 2 || k_max > kMaxDerivativeOrder - 1)
    throw InvalidInput("k_max must lie in [2, " + std::to_string(kMaxDerivativeOrder - 1) + "]");
  MembershipReport r;
  r.class_tag = tag;
  r.q = 2;
  r.C = C;
  const int top = k_max + 1;
  std::vector<bool> limited(static_cast<std::size_t>(top) + 1);
  for (int k = 0; k <= top; ++k) {
    r.derivative_norms.push_back(spectral_derivative_norm(X, k));
    limited[static_cast<std::size_t>(k)] = band_edge_share(X, 2 * k) > kGridLimitedShare;
  }
  const auto& D = r.derivative_norms;
  auto log_factor = [&](int k) {
    return tag == ClassTag::M_C ? k * std::log(C) : log_factorial(k) - k * std::log(C);
  };
  auto statistic = [&](int k) {
    const auto i = static_cast<std::size_t>(k);
    return k % 2 == 0 ? D[i] : 0.5 * (D[i - 1] + D[i + 1]);
  };
  for (int k = 0; k <= 2; ++k) r.M_hat = std::max(r.M_hat, statistic(k) * std::exp(-log_factor(k)));

  bool all_pass = true;
  int first_limited = -1;
  for (int k = 0; k <= k_max; ++k) {
    const double s = statistic(k);
    const double bound = r.M_hat * std::exp(log_factor(k));
    const bool lim = limited[static_cast<std::size_t>(k)] ||
                     (k % 2 == 1 && limited[static_cast<std::size_t>(k + 1)]);
    const bool pass = s <= bound * (1.0 + 1e-12);
    r.derivative_checks.push_back({k, s, bound, pass, lim});
    all_pass = all_pass && pass;
    if (lim && first_limited < 0) first_limited = k;
  }
  std::ostringstream msg;
  if (first_limited >= 0) {
    r.verdict = Verdict::Divergent;
    msg << "derivative norm of order " << first_limited
        << " is dominated by the band edge: the integral does not converge on this grid";
  } else if (all_pass) {
    r.verdict = Verdict::Member;
    msg << "all orders up to " << k_max << " satisfy the bound with M=" << r.M_hat;
  } else {
    r.verdict = Verdict::Inconclusive;
    msg << "some orders exceed the bound calibrated on k<=2; a larger C may still admit x";
  }
  r.reason = msg.str();
  return r;
}

}  // namespace

MembershipReport membership_mc(const Spectrum& X, double C, int k_max) {
  return derivative_membership(X, C, k_max, ClassTag::M_C);
}

MembershipReport membership_nc(const Spectrum& X, double C, int k_max) {
  return derivative_membership(X, C, k_max, ClassTag::N_C);
}

void write_membership_csv(std::ostream& out, const MembershipReport& report) {
  const std::string verdict = to_string(report.verdict);
  if (report.class_tag == ClassTag::X_qT) {
    out << "omega,tail,log_tail,verdict\n";
    for (const auto& p : report.tail_curve)
      out << format_double(p.omega) << ',' << format_double(p.value) << ','
          << format_double(p.log_value) << ',' << verdict << '\n';
    return;
  }
  out << "k,statistic,bound,passes,grid_limited,verdict\n";
  for (const auto& c : report.derivative_checks)
    out << c.k << ',' << format_double(c.statistic) << ',' << format_double(c.bound) << ','
        << (c.passes ? 1 : 0) << ',' << (c.grid_limited ? 1 : 0) << ',' << verdict << '\n';
}

std::vector<double> exponential_series_partial_sums(const Spectrum& X, double T, int k_max) {
  if (!(T >= 0.0)) throw InvalidInput("horizon T must be nonnegative");
  if (k_max < 0) throw InvalidInput("series length must be nonnegative");
  std::vector<double> out;
  double acc = 0.0;
  for (int k = 0; k <= k_max; ++k) {
    const double moment = spectral_moment(X, k);
    if (moment > 0.0) acc += std::exp(k * std::log(2.0 * T) - log_factorial(k) + std::log(moment));
    out.push_back(acc);
  }
  return out;
}

double exponential_moment(const Spectrum& X, double T) {
  const FrequencyGrid& fg = X.grid();
  double acc = 0.0;
  for (std::size_t m = 0; m < X.size(); ++m) {
    const double a = std::abs(X[m]);
    if (a == 0.0) continue;
    acc += std::exp(2.0 * T * std::abs(fg.omega(m)) + 2.0 * std::log(a));
  }
  return acc * fg.d_omega();
}

// ---------------------------------------------------------------------------
// Family sampling

std::vector<GaussianMixtureParams> sample_family(const FamilyBounds& bounds, std::size_t count,
                                                 std::uint64_t seed) {
  bounds.validate();
  if (count < 1) throw InvalidInput("family size must be at least 1");
  const auto max_terms = static_cast<std::uint64_t>(std::floor(bounds.C1));
  std::vector<GaussianMixtureParams> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    CounterRng rng(seed, i);
    GaussianMixtureParams p;
    const std::uint64_t n = i == 0 ? max_terms : 1 + rng.below(max_terms);
    for (std::uint64_t j = 0; j < n; ++j) {
      GaussianTerm t;
      t.c = rng.uniform(-bounds.C2, bounds.C2);
      t.v = bounds.C3 * std::exp(rng.uniform() * std::log(bounds.width_span));
      t.a = rng.uniform(-bounds.C4, bounds.C4);
      const double sign = (j % 2 == 0) ? 1.0 : -1.0;
      if (i == 1) t.c = sign * bounds.C2;
      if (i == 2) t.v = bounds.C3;
      if (i == 3) t.a = sign * bounds.C4;
      p.terms.push_back(t);
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace weakpred
