#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mmimo/common.hpp"
#include "mmimo/detect.hpp"

/// Experiment plumbing behind the command-line tool: configuration, the
/// rate-versus-antennas and DoF-contour sweeps, and CSV persistence.
namespace mmimo::expcli {

enum class Experiment { kRateVsN, kDofContour, kValidate };

std::string_view to_string(Experiment experiment);
/// Accepts "rate-vs-n", "dof-contour" and "validate".
Experiment parse_experiment(std::string_view name);

/// How P follows N: "P=N", "P=N/d" or an explicit "P=<int>".
struct DofRule {
  enum class Kind { kFull, kDivided, kExplicit };
  Kind kind = Kind::kFull;
  int value = 1;  // divisor, or P itself for kExplicit

  static DofRule parse(std::string_view text);
  std::string label() const;  // "N", "N/3", "40"
  /// round(N / d) clamped to [1, N]; an explicit P above N throws ConfigError.
  int dof(int antennas) const;
};

double db_to_linear(double db);

struct ExperimentConfig {
  Experiment experiment = Experiment::kRateVsN;
  int cells = 4;
  int users = 10;
  double rho_db = 0.0;
  double rho_tau_db = kInfinity;  // "infinite" means noiseless training
  std::vector<double> alphas;
  double lambda = 0.0;  // <= 0 selects 1 / (rho N)
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output;

  // rate-vs-n
  std::vector<int> antennas;
  std::vector<DofRule> dof_rules;
  int trials = 500;
  std::vector<int> eval_cells;  // empty means every cell

  // dof-contour
  std::vector<double> rho_n_db;
  std::vector<double> etas;

  // validate
  std::vector<std::string> checks;  // empty means all
  std::map<std::string, double> tolerances;

  /// Throws ConfigError for empty grids or out-of-range values.
  void validate() const;
  /// Flattened key/value view, written as the CSV preamble.
  std::vector<std::pair<std::string, std::string>> echo() const;
};

/// Defaults: rate-vs-n runs the antenna sweep (K=10, L=4,
/// rho=0 dB, alpha=0.1, P in {N, N/3}, N=20..400); dof-contour covers
/// alpha in {0.3, 0.1} with L=4.
ExperimentConfig default_config(Experiment experiment);

/// Overlays a flat YAML mapping on the defaults. Unknown keys are errors.
ExperimentConfig parse_config(const std::string& text, Experiment experiment);
ExperimentConfig load_config(const std::string& path, Experiment experiment);

/// One sweep point of the antenna experiment.
struct RatePoint {
  int antennas = 0;
  DofRule rule;
  double alpha = 0.0;
};

struct RateResult {
  RatePoint point;
  int dof = 0;
  double lambda = 0.0;
  double mc_mf = 0.0, se_mf = 0.0, de_mf = 0.0;
  double mc_mmse = 0.0, se_mmse = 0.0, de_mmse = 0.0;
  double cf_mf = 0.0, cf_mmse = 0.0;  // NaN when closed forms do not apply
  detect::RateSamples samples;         // kept only on request
  std::string status = "ok";
};

std::vector<RatePoint> rate_points(const ExperimentConfig& config);
RateResult evaluate_rate_point(const ExperimentConfig& config, const RatePoint& point, int mc_threads = 1,
                               bool keep_samples = false);

struct DofPoint {
  double alpha = 0.0;
  double rho_n_db = 0.0;
  double eta = 0.0;
};

struct DofResult {
  DofPoint point;
  double lambda = 0.0;
  double rate_inf = 0.0;
  double target_rate = 0.0;
  double dof_mf = 0.0;
  double dof_mmse = 0.0;
  std::string status_mf;
  std::string status_mmse;
};

std::vector<DofPoint> dof_points(const ExperimentConfig& config);
DofResult evaluate_dof_point(const ExperimentConfig& config, const DofPoint& point);

std::vector<std::string> rate_columns();
std::vector<std::string> dof_columns();

struct SweepSummary {
  int computed = 0;
  int reused = 0;  // rows found in an existing output file
  int failed = 0;  // rows carrying an "error: ..." status
};

/// Runs the sweep and writes config.output ("-" for stdout). An existing
/// file with the same columns is resumed: rows already present (keyed by
/// the swept parameters and the seed) are kept, a truncated last line is
/// dropped, and only missing rows are computed and appended.
SweepSummary run_rate_vs_n(const ExperimentConfig& config);
SweepSummary run_dof_contour(const ExperimentConfig& config);

/// Version string written into every row.
std::string_view version();

/// Fixed number formatting shared by every CSV writer.
std::string format_number(double value);

}  // namespace mmimo::expcli
