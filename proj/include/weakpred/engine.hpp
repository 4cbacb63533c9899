#pragma once

// Target functional, causal predictions, error reports and the studies built
// from them.
//
//   y(t)     = int_t^{t+T} k(t - s) x(s) ds           (needs the future of x)
//   y_hat(t) = int_{-inf}^{t} k_hat(t - s) x(s) ds    (history only)
//
// Errors are measured on an interior window that excludes the wrap-around
// and warm-up regions of the finite grid.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "weakpred/predictor.hpp"
#include "weakpred/processes.hpp"
#include "weakpred/signal.hpp"

namespace weakpred {

enum class PredictionMode { Spectral, TimeDomain };
std::string to_string(PredictionMode m);

/// y on the grid of x with the final T trimmed (those values need samples
/// past the end of the window).
SampledSignal target_output(const SampledSignal& x, const HorizonKernel& k);

/// Inverse transform of K_hat * X, combined in log-magnitude space.
/// Throws NumericalRejection naming the offending bins on overflow.
SampledSignal predicted_output_spectral(const Spectrum& X, const PredictorSpec& spec,
                                        const TimeGrid& grid);

/// Causal discrete convolution of x with k_hat over lookback `memory`
/// (seconds). The value at index j reads x only at indices <= j.
SampledSignal predicted_output_time(const SampledSignal& x, const PredictorSpec& spec,
                                    std::optional<double> memory = std::nullopt);
/// Same arithmetic as predicted_output_time, for one output index.
double predicted_value_time(const SampledSignal& x, const PredictorSpec& spec, std::size_t j,
                            std::optional<double> memory = std::nullopt);

struct EvaluationWindow {
  double lo;
  double hi;
};

/// [t_start + max(M, 10T), t_end - 10T].
EvaluationWindow interior_window(const TimeGrid& grid, double T, std::optional<double> memory = {});

struct ErrorReport {
  NormOrder r = NormOrder::L2;
  double abs_error = 0.0;
  double rel_error = 0.0;  // inf when y vanishes but y_hat does not
  double gamma = 0.0;
  PredictionMode mode = PredictionMode::Spectral;
  std::optional<double> memory;  // nullopt: unbounded
  /// The prediction could not be represented in double precision.
  bool overflow = false;
};

/// ||y - y_hat||_r and its ratio to ||y||_r over `window`. Both signals must
/// share dt and be node-aligned.
ErrorReport error_report(const SampledSignal& y, const SampledSignal& y_hat, NormOrder r,
                         const EvaluationWindow& window, double gamma = 0.0,
                         PredictionMode mode = PredictionMode::Spectral,
                         std::optional<double> memory = std::nullopt);

/// The r paired with q by r = q/(q-1): q = 1 -> inf, q = 2 -> 2.
NormOrder dual_norm(int q);

struct StudyRow {
  double swept = 0.0;
  std::string label;
  ErrorReport report;
};

struct StudyTable {
  std::string swept_name;
  std::vector<StudyRow> rows;
  std::map<std::string, std::string> metadata;
};

/// Header: swept,label,gamma,abs_error,rel_error,r,mode,memory,overflow.
void write_study_csv(std::ostream& out, const StudyTable& table);
StudyTable read_study_csv(std::istream& in);

/// True when `values` never increases, except for at most `allowed_steps`
/// increases of at most `tolerance` (relative) each.
bool nonincreasing_with_jitter(const std::vector<double>& values, int allowed_steps = 1,
                               double tolerance = 0.05);

struct StudyOptions {
  unsigned jobs = 1;
};

/// One spectral-mode ErrorReport per gamma (increasing). Predictions that
/// overflow are recorded as infinite error with overflow = true.
StudyTable convergence_study(const Process& x, const HorizonKernel& k,
                             const std::vector<double>& gammas, NormOrder r,
                             const StudyOptions& options = {});

/// Worst-case error over a family sharing one predictor per epsilon, with
/// gamma = gamma_for_band(eps, 1/eps, T). Members are scaled into the unit
/// ball of L_q by dividing by max(1, ||X||_{L_q}). Rows: one per (eps, member)
/// plus one `worst` row per eps.
StudyTable uniformity_study(const std::vector<Process>& family, const HorizonKernel& k, int q,
                            const std::vector<double>& epsilons, const StudyOptions& options = {});

/// Orthonormal trigonometric basis of L2(-T, 0): 1/sqrt(T), then
/// sqrt(2/T) cos / sin pairs of increasing frequency.
std::vector<HorizonKernel> fourier_basis(double T, double dt, int basis_size);

/// Predicts the coefficients f_m = int_tau^{tau+T} K_m(tau - s) x(s) ds for
/// each gamma and reports per-coefficient errors normalized by
/// ||x||_{L2(tau, tau+T)}, plus the reconstruction error of x on the window.
StudyTable fourier_coefficient_experiment(const Process& x, int basis_size, double tau, double T,
                                          const std::vector<double>& gammas,
                                          const StudyOptions& options = {});

struct SnapshotResult {
  double true_integral;
  double predicted_integral;
  double rel_error;
  double gamma;
};

/// Estimate int_0^T k(-s) x(s) ds from the predictor output at t = 0.
SnapshotResult snapshot_estimate(const Process& x, const HorizonKernel& k, double gamma);

}  // namespace weakpred
