#pragma once

#include <string_view>

#include "mmimo/common.hpp"
#include "mmimo/detect.hpp"

/// Closed forms for the angular-bin model with noiseless training, where
/// everything depends on the effective SNR rho N, the DoF per user P/K, the
/// intercell factor alpha and the cell count L.
namespace mmimo::closedform {

struct SimpleSystemPoint {
  double effective_snr = 1.0;  // rho N, linear
  double dof_per_user = 1.0;   // P / K
  double alpha = 1.0;
  int cells = 1;
  double lambda = 0.0;  // <= 0 selects 1 / (rho N)

  double lbar() const { return 1.0 + alpha * (cells - 1); }
  double users_per_dof() const { return 1.0 / dof_per_user; }
  double regularizer() const { return lambda > 0.0 ? lambda : 1.0 / effective_snr; }

  /// Throws ConfigError for nonpositive fields or alpha outside [0, 1].
  void validate() const;
};

struct MfClosedForm {
  double gamma = 0.0;
  double noise = 0.0;          // Lbar / (rho N)
  double multiuser = 0.0;      // (K/P) Lbar^2
  double contamination = 0.0;  // alpha (Lbar - 1)
};

MfClosedForm gamma_mf_simple(const SimpleSystemPoint& point);
double rate_mf_simple(const SimpleSystemPoint& point);

struct MmseClosedForm {
  double gamma = 0.0;
  double delta = 0.0;
  double Z = 0.0;
  double X = 0.0;
  double Y = 0.0;
};

/// Throws SingularityError when Z^2 <= K/P.
MmseClosedForm gamma_mmse_simple(const SimpleSystemPoint& point);
double rate_mmse_simple(const SimpleSystemPoint& point);

struct UltimateLimit {
  double gamma_inf = kInfinity;
  double rate_inf = kInfinity;

  bool unbounded() const { return gamma_inf == kInfinity; }
};

/// Infinite without pilot contamination (L = 1 or alpha = 0).
UltimateLimit gamma_rate_infinity(double alpha, int cells);

enum class DofStatus {
  kFeasible,
  kInfeasible,       // noise alone exceeds the budget, or the search hit its cap
  kNoContamination,  // R_inf is infinite; the condition is undefined
};

std::string_view to_string(DofStatus status);

struct DofRequirement {
  detect::Detector detector = detect::Detector::kMatchedFilter;
  DofStatus status = DofStatus::kFeasible;
  double dof_per_user = 0.0;  // NaN unless feasible
  double target_rate = 0.0;
  double rate_inf = 0.0;

  bool feasible() const { return status == DofStatus::kFeasible; }
};

/// Smallest P/K with rate_mf_simple >= eta R_inf, exact algebra.
DofRequirement dof_required_mf(double eta, double effective_snr, double alpha, int cells);

struct BisectionOptions {
  double rel_tolerance = 1e-6;
  double cap = 1e9;
};

/// Smallest P/K with rate_mmse_simple >= eta R_inf, by bisection.
DofRequirement dof_required_mmse(double eta, double effective_snr, double alpha, int cells, double lambda = 0.0,
                                 const BisectionOptions& options = {});

/// Same search for an explicit target rate.
DofRequirement dof_required_mmse_for_rate(double target_rate, double effective_snr, double alpha, int cells,
                                          double lambda = 0.0, const BisectionOptions& options = {});

}  // namespace mmimo::closedform
