#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

/// Named end-to-end checks with pinned tolerances. The command-line
/// `validate` subcommand and the acceptance test both run this suite.
namespace mmimo::validation {

/// One measured quantity and the closed interval it must fall in.
struct Measurement {
  std::string label;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool passed = false;
};

struct CheckResult {
  std::string name;
  std::string description;
  bool passed = false;
  std::vector<Measurement> measurements;
  std::string note;  // failure reason or extra context
  double seconds = 0.0;
};

struct SuiteOptions {
  std::vector<std::string> checks;           // empty runs every check
  std::map<std::string, double> tolerances;  // "check.parameter" overrides
  int trials = 500;                          // Monte Carlo trials of the antenna sweep
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Check names in execution order.
std::vector<std::string> check_names();

/// Every tunable tolerance with its default, keyed "check.parameter".
std::map<std::string, double> default_tolerances();

/// Runs the selected checks. Throws ConfigError for an empty or unknown
/// selection and for unknown tolerance names. on_result fires after each
/// check, in order.
std::vector<CheckResult> run_suite(const SuiteOptions& options,
                                   const std::function<void(const CheckResult&)>& on_result = {});

/// Columns: check,measurement,value,lo,hi,passed (one row per measurement,
/// plus one summary row per check with an empty measurement).
void write_report_csv(std::ostream& out, const std::vector<CheckResult>& results);

/// "PASS name: description" followed by indented measurements.
std::string format_result(const CheckResult& result);

}  // namespace mmimo::validation
