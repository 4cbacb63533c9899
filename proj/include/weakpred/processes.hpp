#pragma once

// Process families and estimators of membership in the predictability classes:
//
//   X(q,T):  int exp(q T |w|) |X(iw)|^q dw < inf
//   M(C):    ||x^(k)||^2 <= C^k M            (odd k: mean of the neighbours)
//   N(C):    ||x^(k)||^2 <= k! C^{-k} M      (odd k: mean of the neighbours)
//
// Class membership involves "there exists M" and limits over all of R; the
// estimators here decide it from finite evidence on a grid and say which
// evidence they used.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "weakpred/signal.hpp"

namespace weakpred {

/// c * exp(-(t - a)^2 / v).
struct GaussianTerm {
  double c = 0.0;
  double a = 0.0;
  double v = 1.0;
};

struct GaussianMixtureParams {
  std::vector<GaussianTerm> terms;

  std::size_t N() const { return terms.size(); }
  void validate() const;
};

/// {N <= C1, |c_m| <= C2, v_m >= C3, |a_m| <= C4}.
struct FamilyBounds {
  double C1 = 1.0;
  double C2 = 1.0;
  double C3 = 1.0;
  double C4 = 1.0;
  /// Widths are drawn in [C3, width_span * C3].
  double width_span = 4.0;

  void validate() const;
  bool contains(const GaussianMixtureParams& p) const;
};

/// Samples of a process together with its closed-form spectrum when one is
/// known. Predictions prefer the closed form: a DFT spectrum carries
/// round-off at high frequencies that V amplifies by up to exp(T |w|).
struct Process {
  std::string id;
  SampledSignal signal;
  std::optional<Spectrum> exact_spectrum;

  Spectrum spectrum() const;
  Process scaled(double factor) const;
};

/// Distance from a term's center to the window edge, in units of sqrt(v).
inline constexpr double kGaussianMargin = 6.0;

/// Samples plus X(iw) = sum c sqrt(pi v) exp(-v w^2/4) exp(-i w a).
/// Rejects terms too close to the window edge, and grids too coarse for the
/// narrowest term (closed form and DFT must agree to 1e-8 relative L2).
Process gaussian_mixture(const GaussianMixtureParams& params, const TimeGrid& grid);
Spectrum gaussian_mixture_spectrum(const GaussianMixtureParams& params, const FrequencyGrid& grid);

struct Impulse {
  double weight = 0.0;
  double location = 0.0;
};

/// Output of the Gaussian filter c*exp(-t^2/v) driven by a train of delta
/// functions, in closed form.
Process gaussian_filter_output(const std::vector<Impulse>& impulses, double c, double v,
                               const TimeGrid& grid, double v_min = 0.0);

/// Real band-limited process: raised-cosine magnitude on [-Omega, Omega]
/// times a seeded sum of `components` randomly placed and weighted phase
/// ramps. Its spectrum is exactly zero outside the band.
Process band_limited_process(double Omega, std::uint64_t seed, const TimeGrid& grid,
                             double amplitude = 1.0, int components = 6);

/// x(t) = (-1)^k t exp(-t) for t > 0, zero otherwise; X(iw) = (-1)^k / (1 + i w)^2.
Process counterexample_te(int sign_index, const TimeGrid& grid);

enum class Verdict { Member, Divergent, Inconclusive };
enum class ClassTag { X_qT, M_C, N_C };

std::string to_string(Verdict v);
std::string to_string(ClassTag c);

struct TailPoint {
  double omega;
  double value;      // may be inf
  double log_value;  // always meaningful; -inf for a vanishing tail
};

struct DerivativeCheck {
  int k;
  double statistic;     // D_k (even k) or (D_{k-1} + D_{k+1})/2 (odd k)
  double bound;         // C^k M or k! C^{-k} M
  bool passes;
  bool grid_limited;    // integral dominated by the band edge
};

struct MembershipReport {
  ClassTag class_tag = ClassTag::X_qT;
  int q = 2;
  double T = 0.0;
  double C = 0.0;
  std::vector<TailPoint> tail_curve;
  /// log of the partial integral over [Omega_i, Omega_{i+1}).
  std::vector<double> log_band_integrals;
  std::vector<double> derivative_norms;
  std::vector<DerivativeCheck> derivative_checks;
  double M_hat = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  std::string reason;
};

inline constexpr double kMemberTailRatio = 1e-8;
inline constexpr double kDivergentBandGrowth = 10.0;
inline constexpr int kDivergentBandRuns = 3;
inline constexpr double kGridLimitedShare = 1e-2;

/// Tail starts 0, d, 2d, ... with d = ln(100)/(qT), below 0.9 of Nyquist,
/// at most 40 points.
std::vector<double> default_omega_list(int q, double T, const FrequencyGrid& grid);

MembershipReport membership_x(const Spectrum& X, int q, double T, const std::vector<double>& omegas);
MembershipReport membership_mc(const Spectrum& X, double C, int k_max);
MembershipReport membership_nc(const Spectrum& X, double C, int k_max);

/// CSV: `omega,tail,log_tail,verdict` for X(q,T) reports and
/// `k,statistic,bound,passes,grid_limited,verdict` for the derivative classes.
void write_membership_csv(std::ostream& out, const MembershipReport& report);

/// Partial sums S_K = sum_{k<=K} (2T)^k/k! int |w|^k |X|^2 dw, K = 0..k_max.
std::vector<double> exponential_series_partial_sums(const Spectrum& X, double T, int k_max);
/// int exp(2 T |w|) |X|^2 dw over every bin of the grid.
double exponential_moment(const Spectrum& X, double T);

/// `count` parameter sets within `bounds`. The first four push one bound each
/// to its extreme (max N, max |c|, min v, max |a|); the rest are uniform draws.
std::vector<GaussianMixtureParams> sample_family(const FamilyBounds& bounds, std::size_t count,
                                                 std::uint64_t seed);

}  // namespace weakpred
