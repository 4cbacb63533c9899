#include "weakpred/engine.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "weakpred/errors.hpp"
#include "weakpred/parallel.hpp"

namespace weakpred {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SynthesisOptions spectral_only() {
  SynthesisOptions o;
  o.enforce_decay = false;
  return o;
}

std::size_t node_index(const TimeGrid& grid, double t, const char* what) {
  const auto j = grid.index_of(t);
  if (!j) throw InvalidInput(std::string(what) + " must fall on a grid node");
  return *j;
}

std::size_t lookback_steps(const PredictorSpec& spec, std::optional<double> memory) {
  const TimeGrid& g = spec.grid();
  const std::size_t j0 = node_index(g, 0.0, "t = 0");
  const std::size_t available = g.n() - 1 - j0;
  if (!memory) return available;
  if (!(*memory > 0.0)) throw InvalidInput("memory M must be positive");
  if (*memory > g.span()) throw InvalidInput("memory M exceeds the grid span");
  return std::min(available, static_cast<std::size_t>(std::floor(*memory / g.dt() + 1e-9)));
}

void check_time_mode(const SampledSignal& x, const PredictorSpec& spec) {
  if (!x.grid().same_sampling(spec.grid()))
    throw InvalidInput("signal and predictor grids differ");
  if (!spec.zeroing_applied())
    throw InvalidInput("time-domain prediction needs k_hat zeroed on t < 0");
}

}  // namespace

std::string to_string(PredictionMode m) {
  return m == PredictionMode::Spectral ? "spectral" : "time_domain";
}

// ---------------------------------------------------------------------------
// Target and predictions

SampledSignal target_output(const SampledSignal& x, const HorizonKernel& k) {
  const TimeGrid& g = x.grid();
  if (std::abs(g.dt() - k.dt()) > 1e-12 * k.dt())
    throw InvalidInput("signal and kernel must share dt");
  const std::size_t L = k.taps() - 1;
  if (L + 2 > g.n()) throw InvalidInput("horizon T exceeds the grid span");
  const std::size_t count = g.n() - L;
  std::vector<double> w(k.taps());
  for (std::size_t l = 0; l < w.size(); ++l) w[l] = k.weight(l) * k.samples()[l];
  const auto xv = x.values();
  std::vector<double> y(count, 0.0);
  for (std::size_t j = 0; j < count; ++j) {
    double acc = 0.0;
    for (std::size_t l = 0; l <= L; ++l) acc += w[l] * xv[j + l];
    y[j] = acc;
  }
  return SampledSignal(TimeGrid(g.t_start(), g.dt(), count), std::move(y));
}

SampledSignal predicted_output_spectral(const Spectrum& X, const PredictorSpec& spec,
                                        const TimeGrid& grid) {
  if (!(X.grid() == spec.K_hat().grid()))
    throw InvalidInput("process spectrum and predictor live on different frequency grids");
  const LogSpectrum product = spec.K_hat().times(X);
  return inverse_signal(product.to_spectrum(), grid);
}

double predicted_value_time(const SampledSignal& x, const PredictorSpec& spec, std::size_t j,
                            std::optional<double> memory) {
  check_time_mode(x, spec);
  if (j >= x.size()) throw InvalidInput("output index outside the grid");
  const SampledSignal k_hat = spec.k_hat();
  const std::size_t j0 = node_index(spec.grid(), 0.0, "t = 0");
  const std::size_t lags = std::min(j, lookback_steps(spec, memory));
  const auto kv = k_hat.values();
  const auto xv = x.values();
  double acc = 0.0;
  for (std::size_t l = 0; l <= lags; ++l) acc += kv[j0 + l] * xv[j - l];
  return acc * x.grid().dt();
}

SampledSignal predicted_output_time(const SampledSignal& x, const PredictorSpec& spec,
                                    std::optional<double> memory) {
  check_time_mode(x, spec);
  const SampledSignal k_hat = spec.k_hat();
  const std::size_t j0 = node_index(spec.grid(), 0.0, "t = 0");
  const std::size_t max_lag = lookback_steps(spec, memory);
  const auto kv = k_hat.values();
  const auto xv = x.values();
  const double dt = x.grid().dt();
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const std::size_t lags = std::min(j, max_lag);
    double acc = 0.0;
    for (std::size_t l = 0; l <= lags; ++l) acc += kv[j0 + l] * xv[j - l];
    out[j] = acc * dt;
  }
  for (double v : out)
    if (!std::isfinite(v)) throw NumericalRejection("time-domain prediction overflowed");
  return SampledSignal(x.grid(), std::move(out));
}

// ---------------------------------------------------------------------------
// Errors

EvaluationWindow interior_window(const TimeGrid& grid, double T, std::optional<double> memory) {
  const double warmup = std::max(memory.value_or(0.0), 10.0 * T);
  const EvaluationWindow w{grid.t_start() + warmup, grid.t_end() - 10.0 * T};
  if (!(w.hi > w.lo)) throw InvalidInput("grid too short for an interior evaluation window");
  return w;
}

NormOrder dual_norm(int q) {
  if (q == 1) return NormOrder::Linf;
  if (q == 2) return NormOrder::L2;
  throw InvalidInput("exponent q must be 1 or 2");
}

ErrorReport error_report(const SampledSignal& y, const SampledSignal& y_hat, NormOrder r,
                         const EvaluationWindow& window, double gamma, PredictionMode mode,
                         std::optional<double> memory) {
  if (std::abs(y.grid().dt() - y_hat.grid().dt()) > 1e-12 * y.grid().dt())
    throw InvalidInput("target and prediction must share dt");
  std::vector<double> yv, dv;
  for (std::size_t j = y.grid().lower_index(window.lo); j < y.size(); ++j) {
    const double t = y.grid().t(j);
    if (t > window.hi) break;
    const auto i = y_hat.grid().index_of(t);
    if (!i) throw InvalidInput("target and prediction grids are not node-aligned");
    yv.push_back(y[j]);
    dv.push_back(y[j] - y_hat[*i]);
  }
  if (yv.empty()) throw InvalidInput("evaluation window contains no samples");
  ErrorReport rep;
  rep.r = r;
  rep.gamma = gamma;
  rep.mode = mode;
  rep.memory = memory;
  rep.abs_error = lr_norm(dv, y.grid().dt(), r);
  const double ny = lr_norm(yv, y.grid().dt(), r);
  rep.rel_error = ny > 0.0 ? rep.abs_error / ny : (rep.abs_error > 0.0 ? kInf : 0.0);
  return rep;
}

// ---------------------------------------------------------------------------
// Study tables

void write_study_csv(std::ostream& out, const StudyTable& table) {
  out << "swept,label,gamma,abs_error,rel_error,r,mode,memory,overflow\n";
  for (const auto& row : table.rows) {
    const auto& e = row.report;
    out << format_double(row.swept) << ',' << row.label << ',' << format_double(e.gamma) << ','
        << format_double(e.abs_error) << ',' << format_double(e.rel_error) << ','
        << to_string(e.r) << ',' << to_string(e.mode) << ','
        << (e.memory ? format_double(*e.memory) : std::string("unbounded")) << ','
        << (e.overflow ? 1 : 0) << '\n';
  }
}

StudyTable read_study_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "swept,label,gamma,abs_error,rel_error,r,mode,memory,overflow")
    throw InvalidInput("study CSV has an unexpected header");
  StudyTable table;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9)
      throw InvalidInput("study CSV row " + std::to_string(row_no) + ": expected 9 columns");
    StudyRow row;
    row.swept = parse_double(cells[0]);
    row.label = cells[1];
    row.report.gamma = parse_double(cells[2]);
    row.report.abs_error = parse_double(cells[3]);
    row.report.rel_error = parse_double(cells[4]);
    row.report.r = parse_norm_order(cells[5]);
    if (cells[6] == "spectral") row.report.mode = PredictionMode::Spectral;
    else if (cells[6] == "time_domain") row.report.mode = PredictionMode::TimeDomain;
    else throw InvalidInput("study CSV row " + std::to_string(row_no) + ": unknown mode");
    if (cells[7] != "unbounded") row.report.memory = parse_double(cells[7]);
    if (cells[8] != "0" && cells[8] != "1")
      throw InvalidInput("study CSV row " + std::to_string(row_no) + ": overflow must be 0 or 1");
    row.report.overflow = cells[8] == "1";
    table.rows.push_back(std::move(row));
  }
  return table;
}

bool nonincreasing_with_jitter(const std::vector<double>& values, int allowed_steps, double tolerance) {
  int steps = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] <= values[i - 1]) continue;
    if (!(values[i] <= values[i - 1] * (1.0 + tolerance))) return false;
    if (++steps > allowed_steps) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Studies

StudyTable convergence_study(const Process& x, const HorizonKernel& k,
                             const std::vector<double>& gammas, NormOrder r,
                             const StudyOptions& options) {
  if (gammas.empty()) throw InvalidInput("gamma sweep is empty");
  for (std::size_t i = 1; i < gammas.size(); ++i)
    if (!(gammas[i] > gammas[i - 1])) throw InvalidInput("gamma sweep must be increasing");
  const TimeGrid& grid = x.signal.grid();
  const SampledSignal y = target_output(x.signal, k);
  const Spectrum X = x.spectrum();
  const EvaluationWindow window = interior_window(grid, k.T());

  auto rows = parallel_map(gammas.size(), options.jobs, [&](std::size_t i) {
    const double gamma = gammas[i];
    StudyRow row{gamma, "gamma", {}};
    const PredictorSpec spec = synthesize(k, gamma, grid, spectral_only());
    try {
      const SampledSignal y_hat = predicted_output_spectral(X, spec, grid);
      row.report = error_report(y, y_hat, r, window, gamma, PredictionMode::Spectral);
    } catch (const NumericalRejection&) {
      row.report.r = r;
      row.report.gamma = gamma;
      row.report.abs_error = kInf;
      row.report.rel_error = kInf;
      row.report.overflow = true;
    }
    return row;
  });

  StudyTable table{"gamma", std::move(rows), {}};
  std::vector<double> rel;
  for (const auto& row : table.rows) rel.push_back(row.report.rel_error);
  table.metadata["process"] = x.id;
  table.metadata["T"] = format_double(k.T());
  table.metadata["r"] = to_string(r);
  table.metadata["final_rel_error"] = format_double(rel.back());
  table.metadata["nonincreasing"] = nonincreasing_with_jitter(rel) ? "true" : "false";
  table.metadata["nonincreasing_after_first"] =
      nonincreasing_with_jitter(std::vector<double>(rel.begin() + 1, rel.end())) ? "true" : "false";
  return table;
}

StudyTable uniformity_study(const std::vector<Process>& family, const HorizonKernel& k, int q,
                            const std::vector<double>& epsilons, const StudyOptions& options) {
  if (family.empty()) throw InvalidInput("uniformity study needs a nonempty family");
  if (epsilons.empty()) throw InvalidInput("epsilon list is empty");
  const NormOrder r = dual_norm(q);
  const TimeGrid& grid = family.front().signal.grid();
  for (const auto& p : family)
    if (!(p.signal.grid() == grid)) throw InvalidInput("family members must share one grid");

  StudyTable table{"epsilon", {}, {}};
  std::vector<Process> members;
  std::vector<SampledSignal> targets;
  for (std::size_t i = 0; i < family.size(); ++i) {
    const double norm = spectrum_lq_norm(family[i].spectrum(), q);
    const double scale = 1.0 / std::max(1.0, norm);
    members.push_back(family[i].scaled(scale));
    targets.push_back(target_output(members.back().signal, k));
    table.metadata["normalization." + std::to_string(i)] = format_double(scale);
  }
  const EvaluationWindow window = interior_window(grid, k.T());

  std::vector<double> worst_abs;
  for (double eps : epsilons) {
    const double gamma = gamma_for_band(eps, 1.0 / eps, k.T());
    const PredictorSpec spec = synthesize(k, gamma, grid, spectral_only());
    auto reports = parallel_map(members.size(), options.jobs, [&](std::size_t i) {
      ErrorReport rep;
      try {
        const SampledSignal y_hat = predicted_output_spectral(members[i].spectrum(), spec, grid);
        rep = error_report(targets[i], y_hat, r, window, gamma, PredictionMode::Spectral);
      } catch (const NumericalRejection&) {
        rep.r = r;
        rep.gamma = gamma;
        rep.abs_error = rep.rel_error = kInf;
        rep.overflow = true;
      }
      return rep;
    });
    ErrorReport worst;
    worst.r = r;
    worst.gamma = gamma;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      table.rows.push_back({eps, "member-" + std::to_string(i), reports[i]});
      worst.abs_error = std::max(worst.abs_error, reports[i].abs_error);
      worst.rel_error = std::max(worst.rel_error, reports[i].rel_error);
      worst.overflow = worst.overflow || reports[i].overflow;
    }
    table.rows.push_back({eps, "worst", worst});
    worst_abs.push_back(worst.abs_error);
  }
  table.metadata["q"] = std::to_string(q);
  table.metadata["T"] = format_double(k.T());
  table.metadata["worst_nonincreasing"] = nonincreasing_with_jitter(worst_abs, 0, 0.0) ? "true" : "false";
  return table;
}

std::vector<HorizonKernel> fourier_basis(double T, double dt, int basis_size) {
  if (basis_size < 1 || basis_size > 64) throw InvalidInput("basis size must lie in [1, 64]");
  std::vector<HorizonKernel> out;
  out.push_back(HorizonKernel::boxcar(T, dt, 1.0 / std::sqrt(T)));
  const double amp = std::sqrt(2.0 / T);
  for (int m = 1; static_cast<int>(out.size()) < basis_size; ++m) {
    const double freq = 2.0 * kPi * m / T;
    out.push_back(HorizonKernel::from_function(T, dt, [=](double t) { return amp * std::cos(freq * (t + T)); }));
    if (static_cast<int>(out.size()) < basis_size)
      out.push_back(HorizonKernel::from_function(T, dt, [=](double t) { return amp * std::sin(freq * (t + T)); }));
  }
  return out;
}

StudyTable fourier_coefficient_experiment(const Process& x, int basis_size, double tau, double T,
                                          const std::vector<double>& gammas,
                                          const StudyOptions& options) {
  if (gammas.empty()) throw InvalidInput("gamma list is empty");
  const TimeGrid& grid = x.signal.grid();
  const std::size_t j_tau = node_index(grid, tau, "tau");
  const auto basis = fourier_basis(T, grid.dt(), basis_size);
  const std::size_t L = basis.front().taps() - 1;
  if (j_tau + L >= grid.n()) throw InvalidInput("window [tau, tau+T] leaves the grid");
  const Spectrum X = x.spectrum();

  // Reference coefficients and the window norm, by the same trapezoid rule.
  std::vector<double> exact;
  for (const auto& K : basis) exact.push_back(target_output(x.signal, K)[j_tau]);
  std::vector<double> window(x.signal.values().begin() + static_cast<std::ptrdiff_t>(j_tau),
                             x.signal.values().begin() + static_cast<std::ptrdiff_t>(j_tau + L + 1));
  auto window_norm = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t l = 0; l < v.size(); ++l) s += basis.front().weight(l) * v[l] * v[l];
    return std::sqrt(s);
  };
  const double x_norm = window_norm(window);
  // x(tau + l dt) ~ sum_m f_m K_m(-l dt)
  auto reconstruction_error = [&](const std::vector<double>& coef) {
    std::vector<double> diff(window);
    for (std::size_t m = 0; m < basis.size(); ++m)
      for (std::size_t l = 0; l <= L; ++l) diff[l] -= coef[m] * basis[m].samples()[l];
    return window_norm(diff);
  };

  StudyTable table{"basis_index", {}, {}};
  for (double gamma : gammas) {
    auto predicted = parallel_map(basis.size(), options.jobs, [&](std::size_t m) {
      const PredictorSpec spec = synthesize(basis[m], gamma, grid, spectral_only());
      return predicted_output_spectral(X, spec, grid)[j_tau];
    });
    for (std::size_t m = 0; m < basis.size(); ++m) {
      ErrorReport rep;
      rep.r = NormOrder::Linf;
      rep.gamma = gamma;
      rep.abs_error = std::abs(predicted[m] - exact[m]);
      rep.rel_error = x_norm > 0.0 ? rep.abs_error / x_norm : (rep.abs_error > 0.0 ? kInf : 0.0);
      table.rows.push_back({static_cast<double>(m + 1), "coefficient", rep});
    }
    ErrorReport rec;
    rec.r = NormOrder::L2;
    rec.gamma = gamma;
    rec.abs_error = reconstruction_error(predicted);
    rec.rel_error = x_norm > 0.0 ? rec.abs_error / x_norm : 0.0;
    table.rows.push_back({static_cast<double>(basis.size()), "reconstruction", rec});
  }
  ErrorReport truncation;
  truncation.r = NormOrder::L2;
  truncation.gamma = kInf;
  truncation.abs_error = reconstruction_error(exact);
  truncation.rel_error = x_norm > 0.0 ? truncation.abs_error / x_norm : 0.0;
  table.rows.push_back({static_cast<double>(basis.size()), "truncation", truncation});
  table.metadata["tau"] = format_double(tau);
  table.metadata["T"] = format_double(T);
  table.metadata["window_norm"] = format_double(x_norm);
  return table;
}

SnapshotResult snapshot_estimate(const Process& x, const HorizonKernel& k, double gamma) {
  const TimeGrid& grid = x.signal.grid();
  const std::size_t j0 = node_index(grid, 0.0, "t = 0");
  const SampledSignal y = target_output(x.signal, k);
  if (j0 >= y.size()) throw InvalidInput("grid ends before t = T");
  const PredictorSpec spec = synthesize(k, gamma, grid, spectral_only());
  const double predicted = predicted_output_spectral(x.spectrum(), spec, grid)[j0];
  const double truth = y[j0];
  const double rel = truth != 0.0 ? std::abs(predicted - truth) / std::abs(truth)
                                  : (predicted != 0.0 ? kInf : 0.0);
  return {truth, predicted, rel, gamma};
}

}  // namespace weakpred
