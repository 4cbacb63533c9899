#include <CLI11.hpp>

#include <iostream>

#include "weakpred/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Causal prediction of finite-horizon anticausal convolutions"};
  app.require_subcommand(1);

  std::string config;
  std::string output_dir;
  unsigned jobs = 1;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"synthesize", "Write the predictor spectrum, kernel and metadata"},
      {"predict", "One-shot prediction with its error report"},
      {"converge", "Error against gamma for one process"},
      {"uniform", "Worst-case error over a family against epsilon"},
      {"class-check", "Membership reports for the predictability classes"},
      {"lemma-check", "Transfer-function identity, envelope and band-rule checks"},
      {"snapshot-demo", "Estimate a future integral from the history at t = 0"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "Experiment config file")->check(CLI::ExistingFile);
    sub->add_option("--output-dir", output_dir, "Overrides output_dir from the config");
    sub->add_option("--jobs", jobs, "Worker threads for sweeps")->check(CLI::Range(1u, 1024u));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : weakpred::kExitConfigError;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  weakpred::RunOptions options;
  options.jobs = jobs;
  if (!output_dir.empty()) options.output_dir = output_dir;
  std::optional<std::filesystem::path> config_path;
  if (!config.empty()) config_path = config;
  return weakpred::run_main(weakpred::parse_command(name), config_path, options, std::cout, std::cerr);
}
