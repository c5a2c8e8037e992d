// mmimo: runs the antenna sweep, the DoF contours and the validation suite.
//
// Exit status: 0 success, 1 validation failure, 2 configuration error,
// 3 runtime failure (I/O, solver breakdown outside a sweep row).

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mmimo/common.hpp"
#include "mmimo/experiment.hpp"
#include "mmimo/validation.hpp"

namespace {

using mmimo::expcli::Experiment;
using mmimo::expcli::ExperimentConfig;

struct CommonFlags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> threads;
};

void add_common(CLI::App* app, CommonFlags& flags, bool with_trials) {
  app->add_option("--config", flags.config, "YAML file overriding the defaults")->check(CLI::ExistingFile);
  app->add_option("--out", flags.out, "output CSV path, '-' for stdout");
  app->add_option("--seed", flags.seed, "master RNG seed");
  if (with_trials) app->add_option("--trials", flags.trials, "Monte Carlo trials per point");
  app->add_option("--threads", flags.threads, "worker threads");
}

ExperimentConfig resolve(Experiment experiment, const CommonFlags& flags) {
  ExperimentConfig c = flags.config.empty() ? mmimo::expcli::default_config(experiment)
                                            : mmimo::expcli::load_config(flags.config, experiment);
  if (flags.out) c.output = *flags.out;
  if (flags.seed) c.seed = *flags.seed;
  if (flags.trials) c.trials = *flags.trials;
  if (flags.threads) c.threads = *flags.threads;
  c.validate();
  return c;
}

int report_sweep(const mmimo::expcli::SweepSummary& s, const ExperimentConfig& c) {
  std::cerr << to_string(c.experiment) << ": " << s.computed << " rows computed, " << s.reused
            << " reused, " << s.failed << " with errors -> " << (c.output == "-" ? "stdout" : c.output) << '\n';
  return 0;
}

int run_validate(const ExperimentConfig& c, const std::vector<std::string>& extra_checks) {
  mmimo::validation::SuiteOptions options;
  options.checks = extra_checks.empty() ? c.checks : extra_checks;
  options.tolerances = c.tolerances;
  options.trials = c.trials;
  options.seed = c.seed;
  options.threads = c.threads;

  const auto results = mmimo::validation::run_suite(
      options, [](const auto& r) { std::cerr << mmimo::validation::format_result(r) << std::flush; });

  if (c.output == "-") {
    mmimo::validation::write_report_csv(std::cout, results);
  } else {
    std::ofstream file(c.output);
    if (!file) throw std::runtime_error("cannot open " + c.output + " for writing");
    mmimo::validation::write_report_csv(file, results);
  }
  int failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::cerr << results.size() - failed << "/" << results.size() << " checks passed\n";
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Massive MIMO uplink experiments"};
  app.require_subcommand(1);

  CommonFlags rate_flags, dof_flags, val_flags;
  auto* rate = app.add_subcommand("rate-vs-n", "ergodic rate vs antennas: Monte Carlo and deterministic equivalents");
  add_common(rate, rate_flags, true);
  auto* dof = app.add_subcommand("dof-contour", "DoF per user needed to reach a fraction of R_inf");
  add_common(dof, dof_flags, false);
  auto* val = app.add_subcommand("validate", "run the named validation checks");
  add_common(val, val_flags, true);
  std::vector<std::string> checks;
  bool list = false;
  val->add_option("--check", checks, "run only this check (repeatable)");
  val->add_flag("--list", list, "print check names and tolerances, then exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*rate) {
      const auto c = resolve(Experiment::kRateVsN, rate_flags);
      return report_sweep(mmimo::expcli::run_rate_vs_n(c), c);
    }
    if (*dof) {
      const auto c = resolve(Experiment::kDofContour, dof_flags);
      return report_sweep(mmimo::expcli::run_dof_contour(c), c);
    }
    if (list) {
      for (const auto& name : mmimo::validation::check_names()) std::cout << name << '\n';
      for (const auto& [key, value] : mmimo::validation::default_tolerances())
        std::cout << "  " << key << " = " << mmimo::expcli::format_number(value) << '\n';
      return 0;
    }
    return run_validate(resolve(Experiment::kValidate, val_flags), checks);
  } catch (const mmimo::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
