#pragma once

// Config-driven experiments with CSV artifacts and a hashed manifest.
//
// Config files are flat `key = value` text; `#` starts a comment. Unknown or
// duplicate keys are errors that cite the offending line. See README.md for
// the key reference.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "weakpred/engine.hpp"
#include "weakpred/errors.hpp"
#include "weakpred/predictor.hpp"
#include "weakpred/processes.hpp"

namespace weakpred {

/// Validation failure in a config file; `line` is 0 when the problem is a
/// missing key rather than a bad line.
class ConfigError : public InvalidInput {
 public:
  ConfigError(const std::string& source, std::size_t line, const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class Command { Synthesize, Predict, Converge, Uniform, ClassCheck, LemmaCheck, SnapshotDemo };

Command parse_command(const std::string& name);
std::string to_string(Command c);

struct KernelConfig {
  std::string type = "boxcar";  // boxcar | triangular | samples
  double T = 0.0;
  double height = 1.0;
  std::filesystem::path file;
};

struct ProcessConfig {
  /// zero | gaussian_mixture | gaussian_filter | band_limited |
  /// counterexample_te | family | hidden_mixture
  std::string type;
  GaussianMixtureParams mixture;
  std::vector<Impulse> impulses;
  double filter_c = 1.0;
  double filter_v = 1.0;
  double omega = 1.0;
  double amplitude = 1.0;
  int components = 6;
  int sign = 1;
  FamilyBounds bounds;
  std::size_t family_count = 12;
  int hidden_sources = 2;
  double hidden_v_min = 0.1;
  double hidden_v_max = 0.3;
};

struct ClassCheckConfig {
  std::vector<std::string> tags{"x"};  // x | mc | nc
  std::vector<int> q{1, 2};
  std::optional<double> T;
  double C = 1.0;
  int k_max = 10;
};

struct ExperimentConfig {
  std::string source;  // file name used in diagnostics
  std::string experiment_id;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "output";
  std::optional<double> t_start;
  std::optional<double> dt;
  std::optional<std::size_t> n;
  std::optional<KernelConfig> kernel;
  std::optional<ProcessConfig> process;
  std::optional<double> gamma;
  std::vector<double> gamma_sweep;
  std::vector<double> epsilon_sweep;
  int q = 2;
  std::optional<NormOrder> r;
  std::optional<double> memory;
  PredictionMode mode = PredictionMode::Spectral;
  ClassCheckConfig class_check;
  SynthesisOptions synthesis;
  /// key -> line, for diagnostics raised after parsing.
  std::map<std::string, std::size_t> lines;

  TimeGrid grid() const;
};

/// Parses and type-checks every key. File references are resolved against
/// `base_dir` and must exist.
ExperimentConfig parse_config(std::istream& in, const std::string& source,
                              const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError when `cfg` lacks something `command` needs.
void validate_for(Command command, const ExperimentConfig& cfg);

HorizonKernel build_kernel(const ExperimentConfig& cfg);
/// One process, or the sampled family when process = family.
std::vector<Process> build_processes(const ExperimentConfig& cfg);

struct Artifact {
  std::string name;
  std::string content;
};

struct LemmaCheck {
  std::string name;
  std::size_t cases = 0;
  double worst = 0.0;  // largest observed deviation, in the check's own units
  double tolerance = 0.0;
  bool passed = false;
};

/// Transfer-function identity, envelope and band-rule suites.
std::vector<LemmaCheck> lemma_checks(std::uint64_t seed);

struct RunOptions {
  std::optional<std::filesystem::path> output_dir;
  unsigned jobs = 1;
};

struct RunResult {
  int exit_code = 0;
  std::vector<std::filesystem::path> artifacts;  // manifest last
  std::vector<std::string> messages;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitNumericalRejection = 3;
inline constexpr int kExitCheckFailed = 4;

/// Computes every artifact in memory, then writes them and the manifest.
/// Throws ConfigError, InvalidInput or NumericalRejection; nothing is written
/// when it throws.
RunResult run(Command command, const ExperimentConfig& cfg, const RunOptions& options = {});

/// run() with exceptions mapped to exit codes and diagnostics on `err`.
int run_main(Command command, const std::optional<std::filesystem::path>& config_path,
             const RunOptions& options, std::ostream& out, std::ostream& err);

std::string sha256_hex(const std::string& data);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Parses an artifact CSV and checks it against the schema implied by its
/// file name (suffix): header, column count and field types. Study, signal
/// and spectrum files additionally go through their typed readers.
CsvTable read_artifact_csv(const std::string& name, std::istream& in);

}  // namespace weakpred
