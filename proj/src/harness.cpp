#include "weakpred/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

#include "weakpred/parallel.hpp"
#include "weakpred/rng.hpp"

namespace weakpred {
namespace fs = std::filesystem;

ConfigError::ConfigError(const std::string& source, std::size_t line, const std::string& message)
    : InvalidInput(line ? source + ":" + std::to_string(line) + ": " + message
                        : source + ": " + message),
      line_(line) {}

namespace {

const std::map<std::string, Command>& command_table() {
  static const std::map<std::string, Command> table{
      {"synthesize", Command::Synthesize},   {"predict", Command::Predict},
      {"converge", Command::Converge},       {"uniform", Command::Uniform},
      {"class-check", Command::ClassCheck},  {"lemma-check", Command::LemmaCheck},
      {"snapshot-demo", Command::SnapshotDemo}};
  return table;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(s);
  while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

struct Entry {
  std::string value;
  std::size_t line;
};

// Typed access to the raw entries; every successful lookup marks the key used.
class Reader {
 public:
  Reader(std::string source, std::map<std::string, Entry> entries)
      : source_(std::move(source)), entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    const auto it = entries_.find(key);
    throw ConfigError(source_, it == entries_.end() ? 0 : it->second.line, message);
  }

  std::optional<std::string> text(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    used_.insert(key);
    return it->second.value;
  }

  std::optional<double> number(const std::string& key) {
    const auto t = text(key);
    if (!t) return std::nullopt;
    return to_number(key, *t);
  }

  std::optional<double> positive(const std::string& key) {
    const auto v = number(key);
    if (v && !(*v > 0.0)) fail(key, key + " must be positive");
    return v;
  }

  std::optional<long long> integer(const std::string& key, long long lo, long long hi) {
    const auto t = text(key);
    if (!t) return std::nullopt;
    static const std::regex pattern("[+-]?[0-9]+");
    if (!std::regex_match(*t, pattern)) fail(key, key + ": expected an integer, got '" + *t + "'");
    long long v = 0;
    try {
      v = std::stoll(*t);
    } catch (const std::exception&) {
      fail(key, key + ": integer out of range");
    }
    if (v < lo || v > hi)
      fail(key, key + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
  }

  std::optional<bool> boolean(const std::string& key) {
    const auto t = text(key);
    if (!t) return std::nullopt;
    if (*t == "true" || *t == "1") return true;
    if (*t == "false" || *t == "0") return false;
    fail(key, key + ": expected true or false");
  }

  std::vector<double> numbers(const std::string& key, char sep = ',') {
    const auto t = text(key);
    if (!t) return {};
    std::vector<double> out;
    for (const auto& cell : split(*t, sep)) out.push_back(to_number(key, cell));
    if (out.empty()) fail(key, key + ": empty list");
    return out;
  }

  double to_number(const std::string& key, const std::string& cell) {
    try {
      const double v = parse_double(cell);
      if (!std::isfinite(v)) fail(key, key + ": value must be finite");
      return v;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail(key, key + ": expected a number, got '" + cell + "'");
    }
  }

  void reject_unused() const {
    for (const auto& [key, e] : entries_)
      if (!used_.count(key)) throw ConfigError(source_, e.line, "unknown key '" + key + "'");
  }

  std::map<std::string, std::size_t> line_map() const {
    std::map<std::string, std::size_t> out;
    for (const auto& [key, e] : entries_) out[key] = e.line;
    return out;
  }

 private:
  std::string source_;
  std::map<std::string, Entry> entries_;
  std::set<std::string> used_;
};

GaussianMixtureParams parse_terms(Reader& rd, const std::string& key) {
  GaussianMixtureParams p;
  const auto t = rd.text(key);
  if (!t) return p;
  for (const auto& group : split(*t, ';')) {
    if (group.empty()) continue;
    std::vector<double> v;
    for (const auto& cell : split(group, ',')) v.push_back(rd.to_number(key, cell));
    if (v.size() != 3) rd.fail(key, key + ": each term needs 'c, a, v'");
    p.terms.push_back({v[0], v[1], v[2]});
  }
  return p;
}

std::vector<Impulse> parse_impulses(Reader& rd, const std::string& key) {
  std::vector<Impulse> out;
  const auto t = rd.text(key);
  if (!t) return out;
  for (const auto& group : split(*t, ';')) {
    if (group.empty()) continue;
    const auto at = group.find('@');
    if (at == std::string::npos) rd.fail(key, key + ": each impulse is 'weight@location'");
    out.push_back({rd.to_number(key, trim(group.substr(0, at))),
                   rd.to_number(key, trim(group.substr(at + 1)))});
  }
  return out;
}

template <typename F>
auto with_context(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const NumericalRejection& e) {
    throw NumericalRejection(stage + ": " + e.what());
  } catch (const InvalidInput& e) {
    throw InvalidInput(stage + ": " + e.what());
  }
}

std::string render_signal(const SampledSignal& x) {
  std::ostringstream out;
  write_signal_csv(out, x);
  return out.str();
}

std::string render_study(const StudyTable& t) {
  std::ostringstream out;
  write_study_csv(out, t);
  return out.str();
}

std::string render_metadata(const std::map<std::string, std::string>& meta) {
  std::ostringstream out;
  for (const auto& [k, v] : meta) out << k << '=' << v << '\n';
  return out.str();
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Command parse_command(const std::string& name) {
  const auto it = command_table().find(name);
  if (it == command_table().end()) throw InvalidInput("unknown subcommand '" + name + "'");
  return it->second;
}

std::string to_string(Command c) {
  for (const auto& [name, cmd] : command_table())
    if (cmd == c) return name;
  return "unknown";
}

TimeGrid ExperimentConfig::grid() const {
  if (!t_start || !dt || !n) throw ConfigError(source, 0, "grid.t_start, grid.dt and grid.n are required");
  return TimeGrid(*t_start, *dt, *n);
}

// ---------------------------------------------------------------------------
// Parsing

ExperimentConfig parse_config(std::istream& in, const std::string& source, const fs::path& base_dir) {
  std::map<std::string, Entry> entries;
  std::string raw;
  std::size_t line_no = 0;
  static const std::regex key_pattern("[A-Za-z_]+(\\.[A-Za-z_]+)?");
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!std::regex_match(key, key_pattern)) throw ConfigError(source, line_no, "malformed key '" + key + "'");
    if (value.empty()) throw ConfigError(source, line_no, "key '" + key + "' has an empty value");
    const auto [it, inserted] = entries.emplace(key, Entry{value, line_no});
    if (!inserted)
      throw ConfigError(source, line_no,
                        "duplicate key '" + key + "' (first set on line " + std::to_string(it->second.line) + ")");
  }

  Reader rd(source, std::move(entries));
  ExperimentConfig cfg;
  cfg.source = source;
  cfg.lines = rd.line_map();

  const auto id = rd.text("experiment_id");
  if (!id) throw ConfigError(source, 0, "missing required key 'experiment_id'");
  static const std::regex id_pattern("[A-Za-z0-9_-][A-Za-z0-9._-]*");
  if (!std::regex_match(*id, id_pattern) || id->size() > 128)
    rd.fail("experiment_id", "experiment_id must be 1-128 characters from [A-Za-z0-9._-], not starting with '.'");
  cfg.experiment_id = *id;
  if (const auto s = rd.integer("seed", 0, std::numeric_limits<long long>::max())) cfg.seed = static_cast<std::uint64_t>(*s);
  if (const auto o = rd.text("output_dir")) cfg.output_dir = *o;

  cfg.t_start = rd.number("grid.t_start");
  cfg.dt = rd.positive("grid.dt");
  if (const auto n = rd.integer("grid.n", 16, 1LL << 24)) cfg.n = static_cast<std::size_t>(*n);

  if (const auto type = rd.text("kernel")) {
    KernelConfig k;
    k.type = *type;
    if (k.type != "boxcar" && k.type != "triangular" && k.type != "samples")
      rd.fail("kernel", "kernel must be boxcar, triangular or samples");
    const auto T = rd.positive("kernel.T");
    if (!T) throw ConfigError(source, 0, "missing required key 'kernel.T'");
    k.T = *T;
    if (const auto h = rd.number("kernel.height")) k.height = *h;
    if (const auto f = rd.text("kernel.file")) {
      k.file = base_dir / *f;
      if (!fs::exists(k.file)) rd.fail("kernel.file", "kernel.file '" + k.file.string() + "' does not exist");
    }
    if (k.type == "samples" && k.file.empty()) throw ConfigError(source, 0, "kernel = samples requires kernel.file");
    cfg.kernel = k;
  } else if (rd.has("kernel.T")) {
    rd.fail("kernel.T", "kernel.T given without kernel");
  }

  if (const auto type = rd.text("process")) {
    ProcessConfig p;
    p.type = *type;
    static const std::set<std::string> known{"zero", "gaussian_mixture", "gaussian_filter", "band_limited",
                                             "counterexample_te", "family", "hidden_mixture"};
    if (!known.count(p.type)) rd.fail("process", "unknown process '" + p.type + "'");
    p.mixture = parse_terms(rd, "process.terms");
    p.impulses = parse_impulses(rd, "process.impulses");
    if (const auto v = rd.number("process.c")) p.filter_c = *v;
    if (const auto v = rd.positive("process.v")) p.filter_v = *v;
    if (const auto v = rd.positive("process.omega")) p.omega = *v;
    if (const auto v = rd.number("process.amplitude")) p.amplitude = *v;
    if (const auto v = rd.integer("process.components", 1, 256)) p.components = static_cast<int>(*v);
    if (const auto v = rd.integer("process.sign", 1, 2)) p.sign = static_cast<int>(*v);
    if (rd.has("family.bounds")) {
      const auto b = rd.numbers("family.bounds");
      if (b.size() != 4) rd.fail("family.bounds", "family.bounds needs C1, C2, C3, C4");
      p.bounds.C1 = b[0];
      p.bounds.C2 = b[1];
      p.bounds.C3 = b[2];
      p.bounds.C4 = b[3];
    }
    if (const auto v = rd.number("family.width_span")) p.bounds.width_span = *v;
    try {
      p.bounds.validate();
    } catch (const InvalidInput& e) {
      rd.fail(rd.has("family.bounds") ? "family.bounds" : "family.width_span", e.what());
    }
    if (const auto v = rd.integer("family.count", 1, 10000)) p.family_count = static_cast<std::size_t>(*v);
    if (const auto v = rd.integer("hidden.sources", 1, 16)) p.hidden_sources = static_cast<int>(*v);
    if (const auto v = rd.positive("hidden.v_min")) p.hidden_v_min = *v;
    if (const auto v = rd.positive("hidden.v_max")) p.hidden_v_max = *v;
    if (p.hidden_v_max < p.hidden_v_min) rd.fail("hidden.v_max", "hidden.v_max must be >= hidden.v_min");
    if (p.type == "gaussian_mixture" && p.mixture.terms.empty())
      throw ConfigError(source, cfg.lines.count("process") ? cfg.lines.at("process") : 0,
                        "process = gaussian_mixture requires process.terms");
    if (!p.mixture.terms.empty()) {
      try {
        p.mixture.validate();
      } catch (const InvalidInput& e) {
        rd.fail("process.terms", e.what());
      }
    }
    cfg.process = p;
  }

  cfg.gamma = rd.positive("gamma");
  cfg.gamma_sweep = rd.numbers("sweep.gamma");
  for (std::size_t i = 0; i < cfg.gamma_sweep.size(); ++i)
    if (!(cfg.gamma_sweep[i] > 0.0) || (i > 0 && !(cfg.gamma_sweep[i] > cfg.gamma_sweep[i - 1])))
      rd.fail("sweep.gamma", "sweep.gamma must be positive and increasing");
  cfg.epsilon_sweep = rd.numbers("sweep.epsilon");
  for (double e : cfg.epsilon_sweep)
    if (!(e > 0.0 && e < 1.0)) rd.fail("sweep.epsilon", "sweep.epsilon values must lie in (0, 1)");
  if (const auto q = rd.integer("q", 1, 2)) cfg.q = static_cast<int>(*q);
  if (const auto r = rd.text("r")) {
    try {
      cfg.r = parse_norm_order(*r);
    } catch (const InvalidInput&) {
      rd.fail("r", "r must be 1, 2 or inf");
    }
  }
  cfg.memory = rd.positive("memory_M");
  if (const auto m = rd.text("mode")) {
    if (*m == "spectral") cfg.mode = PredictionMode::Spectral;
    else if (*m == "time_domain") cfg.mode = PredictionMode::TimeDomain;
    else rd.fail("mode", "mode must be spectral or time_domain");
  }

  if (const auto tags = rd.text("class.tags")) {
    cfg.class_check.tags = split(*tags, ',');
    for (const auto& t : cfg.class_check.tags)
      if (t != "x" && t != "mc" && t != "nc") rd.fail("class.tags", "class.tags entries must be x, mc or nc");
  }
  if (rd.has("class.q")) {
    cfg.class_check.q.clear();
    for (double v : rd.numbers("class.q")) {
      if (v != 1.0 && v != 2.0) rd.fail("class.q", "class.q entries must be 1 or 2");
      cfg.class_check.q.push_back(static_cast<int>(v));
    }
  }
  cfg.class_check.T = rd.positive("class.T");
  if (const auto v = rd.positive("class.C")) cfg.class_check.C = *v;
  if (const auto v = rd.integer("class.k_max", 2, 39)) cfg.class_check.k_max = static_cast<int>(*v);

  if (const auto v = rd.boolean("synthesis.zero_negative_time")) cfg.synthesis.zero_negative_time = *v;
  if (const auto v = rd.boolean("synthesis.enforce_decay")) cfg.synthesis.enforce_decay = *v;
  if (const auto v = rd.positive("synthesis.decay_threshold")) cfg.synthesis.decay_threshold = *v;
  if (const auto v = rd.number("synthesis.nyquist_taper")) {
    if (!(*v >= 0.0 && *v < 1.0)) rd.fail("synthesis.nyquist_taper", "synthesis.nyquist_taper must lie in [0, 1)");
    cfg.synthesis.nyquist_taper = *v;
  }

  rd.reject_unused();

  if (cfg.t_start || cfg.dt || cfg.n) {
    if (!cfg.t_start || !cfg.dt || !cfg.n)
      throw ConfigError(source, 0, "grid.t_start, grid.dt and grid.n must be given together");
    if (cfg.kernel) {
      const double steps = cfg.kernel->T / *cfg.dt;
      if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps))
        throw ConfigError(source, cfg.lines.at("kernel.T"), "kernel.T must be a whole number of grid.dt steps");
      if (cfg.kernel->T >= cfg.grid().span())
        throw ConfigError(source, cfg.lines.at("kernel.T"), "kernel.T exceeds the grid span");
    }
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open config file");
  return parse_config(in, path.string(), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

void validate_for(Command command, const ExperimentConfig& cfg) {
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(cfg.source, 0, to_string(command) + " requires " + what);
  };
  if (command == Command::LemmaCheck) return;
  need(cfg.n.has_value(), "grid.t_start, grid.dt and grid.n");
  need(cfg.kernel.has_value() || command == Command::ClassCheck, "kernel and kernel.T");
  if (command != Command::Synthesize) need(cfg.process.has_value(), "process");
  switch (command) {
    case Command::Synthesize:
    case Command::Predict:
      need(cfg.gamma.has_value(), "gamma");
      break;
    case Command::Converge:
      need(!cfg.gamma_sweep.empty(), "sweep.gamma");
      break;
    case Command::Uniform:
      need(!cfg.epsilon_sweep.empty(), "sweep.epsilon");
      break;
    case Command::ClassCheck:
      need(cfg.kernel.has_value() || cfg.class_check.T.has_value() ||
               std::find(cfg.class_check.tags.begin(), cfg.class_check.tags.end(), "x") ==
                   cfg.class_check.tags.end(),
           "class.T or kernel.T for the x class");
      break;
    case Command::SnapshotDemo:
      need(cfg.gamma.has_value() || !cfg.gamma_sweep.empty(), "gamma or sweep.gamma");
      break;
    case Command::LemmaCheck:
      break;
  }
  if (command == Command::Predict && cfg.process->type == "family")
    throw ConfigError(cfg.source, cfg.lines.at("process"), "predict needs a single process, not a family");
}

// ---------------------------------------------------------------------------
// Builders

HorizonKernel build_kernel(const ExperimentConfig& cfg) {
  if (!cfg.kernel) throw ConfigError(cfg.source, 0, "missing kernel");
  const KernelConfig& k = *cfg.kernel;
  const double dt = *cfg.dt;
  return with_context("predictor", [&] {
    if (k.type == "boxcar") return HorizonKernel::boxcar(k.T, dt, k.height);
    if (k.type == "triangular") return HorizonKernel::triangular(k.T, dt).scaled(k.height);
    std::ifstream in(k.file);
    if (!in) throw ConfigError(cfg.source, cfg.lines.at("kernel.file"), "cannot read kernel.file");
    const SampledSignal s = read_signal_csv(in);
    const std::size_t taps = static_cast<std::size_t>(std::llround(k.T / dt)) + 1;
    if (s.size() != taps || std::abs(s.grid().dt() - dt) > 1e-12 * dt ||
        std::abs(s.grid().t_start() + k.T) > 1e-9 * dt)
      throw ConfigError(cfg.source, cfg.lines.at("kernel.file"),
                        "kernel.file must sample t = -T, -T+dt, ..., 0 at grid.dt");
    std::vector<double> samples(s.values().rbegin(), s.values().rend());
    return HorizonKernel(k.T, dt, std::move(samples)).scaled(k.height);
  });
}

namespace {

GaussianMixtureParams hidden_mixture(const ProcessConfig& p, double T, std::uint64_t seed) {
  // Sources sit inside the future window (0, T): narrow, positive offsets.
  CounterRng rng(seed, 0x5eed);
  GaussianMixtureParams out;
  for (int i = 0; i < p.hidden_sources; ++i) {
    GaussianTerm t;
    t.c = rng.uniform(0.5, 1.5);
    t.a = rng.uniform(0.1 * T, 0.9 * T);
    t.v = rng.uniform(p.hidden_v_min, p.hidden_v_max);
    out.terms.push_back(t);
  }
  return out;
}

}  // namespace

std::vector<Process> build_processes(const ExperimentConfig& cfg) {
  if (!cfg.process) throw ConfigError(cfg.source, 0, "missing process");
  const ProcessConfig& p = *cfg.process;
  const TimeGrid g = cfg.grid();
  return with_context("processes", [&]() -> std::vector<Process> {
    if (p.type == "zero") {
      const FrequencyGrid fg(g);
      return {Process{"zero", SampledSignal::zeros(g), Spectrum::zeros(fg)}};
    }
    if (p.type == "gaussian_mixture") return {gaussian_mixture(p.mixture, g)};
    if (p.type == "gaussian_filter") return {gaussian_filter_output(p.impulses, p.filter_c, p.filter_v, g)};
    if (p.type == "band_limited") return {band_limited_process(p.omega, cfg.seed, g, p.amplitude, p.components)};
    if (p.type == "counterexample_te") return {counterexample_te(p.sign, g)};
    if (p.type == "hidden_mixture") {
      const double T = cfg.kernel ? cfg.kernel->T : 1.0;
      Process x = gaussian_mixture(hidden_mixture(p, T, cfg.seed), g);
      x.id = "hidden_mixture";
      return {x};
    }
    std::vector<Process> out;
    const auto params = sample_family(p.bounds, p.family_count, cfg.seed);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Process x = gaussian_mixture(params[i], g);
      x.id = "member-" + std::to_string(i);
      out.push_back(std::move(x));
    }
    return out;
  });
}

// ---------------------------------------------------------------------------
// Transfer-function checks

std::vector<LemmaCheck> lemma_checks(std::uint64_t seed) {
  std::vector<LemmaCheck> out;
  // Independent evaluation at p = i w: V = exp(-2 T p^2 / (gamma + p)).
  auto V_direct = [](double gamma, double T, double w) {
    const std::complex<double> p(0.0, w);
    return std::exp(-2.0 * T * p * p / (gamma + p));
  };

  {
    LemmaCheck c{"modulus_identity", 0, 0.0, 1e-12, true};
    const double Ts[] = {0.1, 0.25, 0.5, 1.0, 2.0};
    for (int ig = 0; ig < 20; ++ig) {
      const double gamma = std::pow(10.0, -2.0 + 6.0 * ig / 19.0);
      for (double T : Ts)
        for (int iw = 0; iw < 200; ++iw) {
          const double w = -50.0 + 100.0 * iw / 199.0;
          const double expected = std::exp(2.0 * T * gamma * w * w / (gamma * gamma + w * w));
          const double lib = std::abs(eval_V(gamma, T, w).value);
          const double direct = std::abs(V_direct(gamma, T, w));
          c.worst = std::max({c.worst, std::abs(lib - expected) / expected,
                              std::abs(direct - expected) / expected});
          ++c.cases;
        }
    }
    c.passed = c.worst <= c.tolerance;
    out.push_back(c);
  }

  {
    // sup over gamma of |V(iw)| against exp(T|w|); attained at gamma = |w|.
    LemmaCheck c{"envelope", 0, 0.0, 1e-9, true};
    CounterRng rng(seed, 2);
    constexpr int per_decade = 400;
    constexpr double lo_exp = -4.0, hi_exp = 6.0;
    const int points = static_cast<int>((hi_exp - lo_exp) * per_decade) + 1;
    double worst_step = 0.0;
    for (int i = 0; i < 50; ++i) {
      const double T = rng.uniform(0.1, 3.0);
      const double w = std::pow(10.0, rng.uniform(-1.0, 2.0)) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      const double envelope = std::exp(T * std::abs(w));
      double best = 0.0;
      int best_j = 0;
      for (int j = 0; j < points; ++j) {
        const double gamma = std::pow(10.0, lo_exp + static_cast<double>(j) / per_decade);
        const double m = std::abs(eval_V(gamma, T, w).value);
        if (m > best) {
          best = m;
          best_j = j;
        }
      }
      c.worst = std::max(c.worst, best / envelope - 1.0);
      const double steps_off = std::abs(lo_exp + static_cast<double>(best_j) / per_decade - std::log10(std::abs(w))) * per_decade;
      worst_step = std::max(worst_step, steps_off);
      ++c.cases;
    }
    c.passed = c.worst <= c.tolerance && worst_step <= 1.0;
    out.push_back(c);
    out.push_back({"envelope_maximizer_steps", c.cases, worst_step, 1.0, worst_step <= 1.0});
  }

  {
    // gamma_for_band keeps |V - 1| <= eps on |w| <= Omega; reported as max |V-1|/eps.
    LemmaCheck c{"band_rule", 0, 0.0, 1.0, true};
    CounterRng rng(seed, 3);
    for (int i = 0; i < 20; ++i) {
      const double eps = std::exp(rng.uniform(std::log(1e-4), std::log(0.9)));
      const double Omega = std::exp(rng.uniform(std::log(0.1), std::log(100.0)));
      const double T = rng.uniform(0.05, 5.0);
      const double gamma = gamma_for_band(eps, Omega, T);
      double worst = 0.0;
      for (int j = 0; j < 10000; ++j) {
        const double w = -Omega + 2.0 * Omega * j / 9999.0;
        worst = std::max(worst, std::abs(V_direct(gamma, T, w) - 1.0));
      }
      c.worst = std::max(c.worst, worst / eps);
      ++c.cases;
    }
    c.passed = c.worst <= c.tolerance;
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Running

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

namespace {

struct Outcome {
  std::vector<Artifact> artifacts;
  std::vector<std::string> messages;
  bool check_failed = false;
};

Outcome run_synthesize(const ExperimentConfig& cfg) {
  const HorizonKernel k = build_kernel(cfg);
  const PredictorSpec spec =
      with_context("predictor", [&] { return synthesize(k, *cfg.gamma, cfg.grid(), cfg.synthesis); });
  Outcome o;
  const std::string& id = cfg.experiment_id;
  const SampledSignal kernel = with_context("predictor", [&] { return spec.k_hat(); });
  std::ostringstream spectrum, meta;
  write_spectrum_csv(spectrum, with_context("predictor", [&] { return spec.K_hat().to_spectrum(); }));
  write_predictor_meta(meta, spec);
  o.artifacts.push_back({id + "_spectrum.csv", spectrum.str()});
  o.artifacts.push_back({id + "_kernel.csv", render_signal(kernel)});
  o.artifacts.push_back({id + "_meta.txt", meta.str()});
  std::ostringstream msg;
  msg << "negative-time energy fraction " << format_double(spec.negative_time_energy_fraction());
  o.messages.push_back(msg.str());
  return o;
}

Outcome run_predict(const ExperimentConfig& cfg) {
  const HorizonKernel k = build_kernel(cfg);
  const Process x = build_processes(cfg).front();
  const TimeGrid g = cfg.grid();
  SynthesisOptions opts = cfg.synthesis;
  if (cfg.mode == PredictionMode::Spectral) opts.enforce_decay = false;
  const PredictorSpec spec = with_context("predictor", [&] { return synthesize(k, *cfg.gamma, g, opts); });
  const SampledSignal y = with_context("engine", [&] { return target_output(x.signal, k); });
  const SampledSignal y_hat = with_context("engine", [&] {
    return cfg.mode == PredictionMode::Spectral ? predicted_output_spectral(x.spectrum(), spec, g)
                                                : predicted_output_time(x.signal, spec, cfg.memory);
  });
  const NormOrder r = cfg.r.value_or(dual_norm(cfg.q));
  const ErrorReport rep = with_context("engine", [&] {
    return error_report(y, y_hat, r, interior_window(g, k.T(), cfg.memory), *cfg.gamma, cfg.mode, cfg.memory);
  });
  StudyTable t{"gamma", {{*cfg.gamma, x.id, rep}}, {}};
  Outcome o;
  o.artifacts.push_back({cfg.experiment_id + "_target.csv", render_signal(y)});
  o.artifacts.push_back({cfg.experiment_id + "_prediction.csv", render_signal(y_hat)});
  o.artifacts.push_back({cfg.experiment_id + "_error.csv", render_study(t)});
  o.messages.push_back("rel_error " + format_double(rep.rel_error));
  return o;
}

Outcome run_converge(const ExperimentConfig& cfg, unsigned jobs) {
  const HorizonKernel k = build_kernel(cfg);
  const NormOrder r = cfg.r.value_or(dual_norm(cfg.q));
  Outcome o;
  for (const Process& x : build_processes(cfg)) {
    const StudyTable t = with_context("engine", [&] { return convergence_study(x, k, cfg.gamma_sweep, r, {jobs}); });
    const std::string stem = cfg.experiment_id + (cfg.process->type == "family" ? "_" + x.id : "");
    o.artifacts.push_back({stem + "_convergence.csv", render_study(t)});
    o.artifacts.push_back({stem + "_convergence_meta.txt", render_metadata(t.metadata)});
    o.messages.push_back(x.id + ": final rel_error " + t.metadata.at("final_rel_error"));
  }
  return o;
}

Outcome run_uniform(const ExperimentConfig& cfg, unsigned jobs) {
  const HorizonKernel k = build_kernel(cfg);
  const auto family = build_processes(cfg);
  const StudyTable t = with_context("engine", [&] { return uniformity_study(family, k, cfg.q, cfg.epsilon_sweep, {jobs}); });
  Outcome o;
  o.artifacts.push_back({cfg.experiment_id + "_uniformity.csv", render_study(t)});
  o.artifacts.push_back({cfg.experiment_id + "_uniformity_meta.txt", render_metadata(t.metadata)});
  o.messages.push_back("worst-case error nonincreasing: " + t.metadata.at("worst_nonincreasing"));
  return o;
}

Outcome run_class_check(const ExperimentConfig& cfg) {
  const auto processes = build_processes(cfg);
  const auto& cc = cfg.class_check;
  const double T = cc.T.value_or(cfg.kernel ? cfg.kernel->T : 0.0);
  Outcome o;
  std::ostringstream summary;
  summary << "process,class,q,T,C,verdict,reason\n";
  for (const Process& x : processes) {
    const Spectrum X = x.spectrum();
    for (const auto& tag : cc.tags) {
      std::vector<MembershipReport> reports;
      with_context("processes", [&] {
        if (tag == "x") {
          for (int q : cc.q) reports.push_back(membership_x(X, q, T, default_omega_list(q, T, X.grid())));
        } else if (tag == "mc") {
          reports.push_back(membership_mc(X, cc.C, cc.k_max));
        } else {
          reports.push_back(membership_nc(X, cc.C, cc.k_max));
        }
        return 0;
      });
      for (const auto& rep : reports) {
        std::ostringstream csv;
        write_membership_csv(csv, rep);
        std::string name = cfg.experiment_id + "_" + x.id + "_" + to_string(rep.class_tag);
        if (tag == "x") name += "_q" + std::to_string(rep.q);
        o.artifacts.push_back({name + ".csv", csv.str()});
        summary << x.id << ',' << to_string(rep.class_tag) << ',' << rep.q << ',' << format_double(rep.T) << ','
                << format_double(rep.C) << ',' << to_string(rep.verdict) << ',' << csv_quote(rep.reason) << '\n';
        o.messages.push_back(x.id + " " + to_string(rep.class_tag) +
                             (tag == "x" ? " q=" + std::to_string(rep.q) : std::string()) + ": " +
                             to_string(rep.verdict));
      }
    }
  }
  o.artifacts.push_back({cfg.experiment_id + "_class_summary.csv", summary.str()});
  return o;
}

Outcome run_lemma_check(const ExperimentConfig& cfg) {
  Outcome o;
  std::ostringstream csv;
  csv << "check,cases,worst,tolerance,passed\n";
  for (const auto& c : lemma_checks(cfg.seed)) {
    csv << c.name << ',' << c.cases << ',' << format_double(c.worst) << ',' << format_double(c.tolerance) << ','
        << (c.passed ? "true" : "false") << '\n';
    o.messages.push_back(c.name + (c.passed ? ": pass" : ": FAIL") + " (worst " + format_double(c.worst) + ")");
    o.check_failed = o.check_failed || !c.passed;
  }
  o.artifacts.push_back({cfg.experiment_id + "_lemma_summary.csv", csv.str()});
  return o;
}

Outcome run_snapshot(const ExperimentConfig& cfg, unsigned jobs) {
  const HorizonKernel k = build_kernel(cfg);
  const Process x = build_processes(cfg).front();
  std::vector<double> gammas = cfg.gamma_sweep;
  if (gammas.empty()) gammas.push_back(*cfg.gamma);
  const auto results = with_context("engine", [&] {
    return parallel_map(gammas.size(), jobs, [&](std::size_t i) { return snapshot_estimate(x, k, gammas[i]); });
  });
  Outcome o;
  std::ostringstream csv;
  csv << "gamma,true_integral,predicted_integral,rel_error\n";
  for (const auto& r : results) {
    csv << format_double(r.gamma) << ',' << format_double(r.true_integral) << ','
        << format_double(r.predicted_integral) << ',' << format_double(r.rel_error) << '\n';
    o.messages.push_back("gamma " + format_double(r.gamma) + ": rel_error " + format_double(r.rel_error));
  }
  o.artifacts.push_back({cfg.experiment_id + "_snapshot.csv", csv.str()});
  return o;
}

}  // namespace

RunResult run(Command command, const ExperimentConfig& cfg, const RunOptions& options) {
  validate_for(command, cfg);
  const unsigned jobs = std::max(1u, options.jobs);
  Outcome o;
  switch (command) {
    case Command::Synthesize: o = run_synthesize(cfg); break;
    case Command::Predict: o = run_predict(cfg); break;
    case Command::Converge: o = run_converge(cfg, jobs); break;
    case Command::Uniform: o = run_uniform(cfg, jobs); break;
    case Command::ClassCheck: o = run_class_check(cfg); break;
    case Command::LemmaCheck: o = run_lemma_check(cfg); break;
    case Command::SnapshotDemo: o = run_snapshot(cfg, jobs); break;
  }

  const fs::path dir = options.output_dir.value_or(cfg.output_dir);
  fs::create_directories(dir);
  RunResult result;
  std::ostringstream manifest;
  manifest << "experiment_id=" << cfg.experiment_id << '\n'
           << "command=" << to_string(command) << '\n'
           << "seed=" << cfg.seed << '\n'
           << "created=" << utc_timestamp() << '\n';
  for (const auto& a : o.artifacts) {
    const fs::path path = dir / a.name;
    std::ofstream out(path, std::ios::binary);
    out << a.content;
    if (!out) throw std::runtime_error("cannot write " + path.string());
    manifest << "artifact=" << sha256_hex(a.content) << "  " << a.content.size() << "  " << a.name << '\n';
    result.artifacts.push_back(path);
  }
  const fs::path manifest_path = dir / (cfg.experiment_id + "_manifest.txt");
  std::ofstream(manifest_path, std::ios::binary) << manifest.str();
  result.artifacts.push_back(manifest_path);
  result.messages = std::move(o.messages);
  result.exit_code = o.check_failed ? kExitCheckFailed : kExitOk;
  return result;
}

int run_main(Command command, const std::optional<fs::path>& config_path, const RunOptions& options,
             std::ostream& out, std::ostream& err) {
  try {
    ExperimentConfig cfg;
    if (config_path) {
      cfg = load_config(*config_path);
    } else if (command == Command::LemmaCheck) {
      std::istringstream defaults("experiment_id = lemma-check\n");
      cfg = parse_config(defaults, "<defaults>");
    } else {
      throw ConfigError("<command line>", 0, "--config is required for " + to_string(command));
    }
    const RunResult r = run(command, cfg, options);
    for (const auto& m : r.messages) out << m << '\n';
    for (const auto& p : r.artifacts) out << "wrote " << p.string() << '\n';
    return r.exit_code;
  } catch (const NumericalRejection& e) {
    err << "numerical rejection: " << e.what() << '\n';
    return kExitNumericalRejection;
  } catch (const InvalidInput& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

// ---------------------------------------------------------------------------
// Artifact schemas

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"' && fields.back().empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw InvalidInput("CSV line " + std::to_string(line_no) + ": unterminated quote");
  return fields;
}

enum class Field { Number, Integer, Flag, Bool, Text, Verdict };

struct Schema {
  std::string suffix;
  std::vector<std::string> header;
  std::vector<Field> types;
};

const std::vector<Schema>& schemas() {
  using F = Field;
  static const std::vector<Schema> s{
      {"_class_summary.csv", {"process", "class", "q", "T", "C", "verdict", "reason"},
       {F::Text, F::Text, F::Integer, F::Number, F::Number, F::Verdict, F::Text}},
      {"_lemma_summary.csv", {"check", "cases", "worst", "tolerance", "passed"},
       {F::Text, F::Integer, F::Number, F::Number, F::Bool}},
      {"_snapshot.csv", {"gamma", "true_integral", "predicted_integral", "rel_error"},
       {F::Number, F::Number, F::Number, F::Number}},
      {"_spectrum.csv", {"omega", "re", "im"}, {F::Number, F::Number, F::Number}},
      {"_convergence.csv", {}, {}},
      {"_uniformity.csv", {}, {}},
      {"_error.csv", {}, {}},
      // Membership reports: one of two layouts by class.
      {"_X_qT_q1.csv", {"omega", "tail", "log_tail", "verdict"}, {F::Number, F::Number, F::Number, F::Verdict}},
      {"_X_qT_q2.csv", {"omega", "tail", "log_tail", "verdict"}, {F::Number, F::Number, F::Number, F::Verdict}},
      {"_M_C.csv", {"k", "statistic", "bound", "passes", "grid_limited", "verdict"},
       {F::Integer, F::Number, F::Number, F::Flag, F::Flag, F::Verdict}},
      {"_N_C.csv", {"k", "statistic", "bound", "passes", "grid_limited", "verdict"},
       {F::Integer, F::Number, F::Number, F::Flag, F::Flag, F::Verdict}},
      {".csv", {"t", "value"}, {F::Number, F::Number}},
  };
  return s;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void check_field(const std::string& v, Field f, std::size_t line_no, const std::string& column) {
  auto fail = [&] {
    throw InvalidInput("CSV line " + std::to_string(line_no) + ": bad value '" + v + "' in column " + column);
  };
  switch (f) {
    case Field::Number:
      try {
        parse_double(v);
      } catch (const InvalidInput&) {
        fail();
      }
      break;
    case Field::Integer:
      if (v.empty() || v.find_first_not_of("-0123456789") != std::string::npos) fail();
      break;
    case Field::Flag:
      if (v != "0" && v != "1") fail();
      break;
    case Field::Bool:
      if (v != "true" && v != "false") fail();
      break;
    case Field::Verdict:
      if (v != "member" && v != "divergent" && v != "inconclusive") fail();
      break;
    case Field::Text: break;
  }
}

}  // namespace

CsvTable read_artifact_csv(const std::string& name, std::istream& in) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto& all = schemas();
  const auto schema = std::find_if(all.begin(), all.end(), [&](const Schema& s) { return ends_with(name, s.suffix); });
  if (schema == all.end()) throw InvalidInput("not a CSV artifact: " + name);

  std::istringstream typed(text);
  if (schema->header.empty()) {
    read_study_csv(typed);
  } else if (schema->suffix == "_spectrum.csv") {
    read_spectrum_csv(typed);
  } else if (schema->suffix == ".csv") {
    read_signal_csv(typed);
  }

  CsvTable table;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    auto fields = split_csv_line(line, line_no);
    if (line_no == 1) {
      table.header = std::move(fields);
      if (!schema->header.empty() && table.header != schema->header)
        throw InvalidInput(name + ": unexpected header");
      continue;
    }
    if (fields.size() != table.header.size())
      throw InvalidInput("CSV line " + std::to_string(line_no) + ": expected " +
                         std::to_string(table.header.size()) + " fields");
    for (std::size_t c = 0; c < schema->types.size(); ++c) check_field(fields[c], schema->types[c], line_no, table.header[c]);
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw InvalidInput(name + ": empty file");
  return table;
}

}  // namespace weakpred
