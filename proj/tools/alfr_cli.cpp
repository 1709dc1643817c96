// alfr: train, compare, and export censored representations.
//
//   alfr run <config> [--output-root DIR]
//   alfr compare <run_dir>... [--json]
//   alfr censor <run_dir> <table> --space latent|original [--output PATH]
//   alfr validate <config>
//
// ALFR_OUTPUT_ROOT overrides [run] output_root.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "alfr/experiment.hpp"

namespace {

int run_verb(const std::string& config_path, const std::string& output_root) {
  alfr::ExperimentConfig config;
  try {
    config = alfr::load_config(config_path);
  } catch (const alfr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return alfr::kExitConfigError;
  }
  if (!output_root.empty()) config.output_root = output_root;
  const auto outcome = alfr::run_experiment(config);
  if (outcome.exit_code == alfr::kExitConfigError) {
    std::cerr << "config error: " << outcome.message << '\n';
    return outcome.exit_code;
  }
  if (!outcome.run_dir.empty()) std::cout << "run dir: " << outcome.run_dir.string() << '\n';
  if (outcome.exit_code == alfr::kExitNumericAbort) {
    std::cerr << "numeric abort: " << outcome.message << '\n';
    return outcome.exit_code;
  }
  if (outcome.exit_code == alfr::kExitFailure) {
    std::cerr << "error: " << outcome.message << '\n';
    return outcome.exit_code;
  }
  std::cout << "terminated by: " << alfr::to_string(outcome.terminated_by) << '\n';
  for (const auto& r : outcome.eval)
    std::cout << alfr::to_string(r.probe_kind) << " probe: " << r.mean_accuracy << " +- " << r.std_accuracy << " ("
              << r.runs << " runs)\n";
  std::cout << "eval mse: " << outcome.final_eval_mse << '\n';
  if (outcome.exit_code == alfr::kExitDeadline) std::cerr << outcome.message << '\n';
  return outcome.exit_code;
}

int validate_verb(const std::string& config_path) {
  try {
    alfr::validate_config(alfr::load_config(config_path));
  } catch (const alfr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return alfr::kExitConfigError;
  }
  std::cout << "ok\n";
  return alfr::kExitOk;
}

int compare_verb(const std::vector<std::string>& dirs, bool as_json) {
  try {
    const auto table = alfr::compare_runs({dirs.begin(), dirs.end()});
    if (as_json) std::cout << table.to_json().dump(2) << '\n';
    else std::cout << table.to_text();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return alfr::kExitFailure;
  }
  return alfr::kExitOk;
}

int censor_verb(const std::string& run_dir, const std::string& table, const std::string& space,
                const std::string& output) {
  try {
    const auto written = alfr::censor_export(
        run_dir, table, space == "original" ? alfr::CensorSpace::original : alfr::CensorSpace::latent, output);
    std::cout << written.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return alfr::kExitFailure;
  }
  return alfr::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial fair representation learning with dampening and stacking"};
  app.require_subcommand(1);

  std::string config_path, output_root;
  auto* run = app.add_subcommand("run", "Train and evaluate one configured experiment");
  run->add_option("config", config_path, "INI config file")->required();
  run->add_option("--output-root", output_root, "Directory that receives the run directory");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config without training");
  validate->add_option("config", config_path, "INI config file")->required();

  std::vector<std::string> dirs;
  bool as_json = false;
  auto* compare = app.add_subcommand("compare", "Tabulate probe accuracy and reconstruction error of runs");
  compare->add_option("run_dirs", dirs, "Completed run directories")->required();
  compare->add_flag("--json", as_json, "Emit JSON instead of aligned text");

  std::string run_dir, table, space = "latent", output;
  auto* censor = app.add_subcommand("censor", "Write e(X) or d(e(X)) of a table using a trained run");
  censor->add_option("run_dir", run_dir, "Completed run directory")->required();
  censor->add_option("table", table, "Input table (.csv or raw f32 with .labels sidecar)")->required();
  censor->add_option("--space", space, "latent or original")->check(CLI::IsMember({"latent", "original"}));
  censor->add_option("--output", output, "Output path (default: inside the run directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : alfr::kExitConfigError;
  }

  if (*run) return run_verb(config_path, output_root);
  if (*validate) return validate_verb(config_path);
  if (*compare) return compare_verb(dirs, as_json);
  if (*censor) return censor_verb(run_dir, table, space, output);
  return alfr::kExitFailure;
}
