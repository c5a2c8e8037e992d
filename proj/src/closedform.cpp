#include "mmimo/closedform.hpp"

#include <cfloat>
#include <cmath>
#include <sstream>

namespace mmimo::closedform {

void SimpleSystemPoint::validate() const {
  if (!(effective_snr > 0.0)) throw ConfigError("effective SNR must be positive");
  if (!(dof_per_user > 0.0)) throw ConfigError("DoF per user must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (cells < 1) throw ConfigError("cell count must be >= 1");
  if (lambda < 0.0) throw ConfigError("regularizer must be positive (or zero for the default)");
}

MfClosedForm gamma_mf_simple(const SimpleSystemPoint& point) {
  point.validate();
  const double lbar = point.lbar();
  MfClosedForm out;
  out.noise = lbar / point.effective_snr;
  out.multiuser = point.users_per_dof() * lbar * lbar;
  out.contamination = point.alpha * (lbar - 1.0);
  out.gamma = 1.0 / (out.noise + out.multiuser + out.contamination);
  return out;
}

double rate_mf_simple(const SimpleSystemPoint& point) { return std::log2(1.0 + gamma_mf_simple(point).gamma); }

MmseClosedForm gamma_mmse_simple(const SimpleSystemPoint& point) {
  point.validate();
  const double lbar = point.lbar();
  const double lbar2 = lbar * lbar;
  const double kp = point.users_per_dof();
  const double lambda = point.regularizer();
  const double a = lambda * lbar;

  MmseClosedForm out;
  const double disc = std::pow(1.0 + a + kp * lbar2, 2) - 4.0 * kp;
  out.delta = (1.0 - a - kp * lbar2 + std::sqrt(disc)) / (2.0 * (a + kp * (lbar2 - 1.0)));
  out.Z = a * (1.0 + out.delta) + kp * (1.0 + (1.0 + out.delta) * (lbar2 - 1.0));
  const double gap = out.Z * out.Z - kp;
  if (!(gap > 0.0)) {
    std::ostringstream msg;
    msg << "MMSE closed form undefined: Z^2 = " << out.Z * out.Z << " <= K/P = " << kp;
    throw SingularityError(msg.str());
  }
  const double alpha2 = point.alpha * point.alpha;
  out.X = out.Z * out.Z / gap;
  out.Y = out.X + (1.0 + alpha2 * (point.cells - 1)) * (1.0 - 2.0 * out.Z) / (lbar2 * gap);
  out.gamma = 1.0 / (lbar / point.effective_snr * out.X + kp * lbar2 * out.Y + point.alpha * (lbar - 1.0));
  return out;
}

double rate_mmse_simple(const SimpleSystemPoint& point) { return std::log2(1.0 + gamma_mmse_simple(point).gamma); }

UltimateLimit gamma_rate_infinity(double alpha, int cells) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (cells < 1) throw ConfigError("cell count must be >= 1");
  const double lbar = 1.0 + alpha * (cells - 1);
  const double contamination = alpha * (lbar - 1.0);
  if (!(contamination > 0.0)) return {};
  const double gamma = 1.0 / contamination;
  return {gamma, std::log2(1.0 + gamma)};
}

std::string_view to_string(DofStatus status) {
  switch (status) {
    case DofStatus::kFeasible:
      return "ok";
    case DofStatus::kInfeasible:
      return "infeasible";
    case DofStatus::kNoContamination:
      return "no_contamination";
  }
  return "?";
}

namespace {

void check_eta(double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("eta must lie in (0, 1)");
}

DofRequirement unresolved(detect::Detector detector, DofStatus status, double target, double rate_inf) {
  DofRequirement out;
  out.detector = detector;
  out.status = status;
  out.dof_per_user = std::nan("");
  out.target_rate = target;
  out.rate_inf = rate_inf;
  return out;
}

}  // namespace

DofRequirement dof_required_mf(double eta, double effective_snr, double alpha, int cells) {
  check_eta(eta);
  if (!(effective_snr > 0.0)) throw ConfigError("effective SNR must be positive");
  const UltimateLimit limit = gamma_rate_infinity(alpha, cells);
  if (limit.unbounded()) {
    return unresolved(detect::Detector::kMatchedFilter, DofStatus::kNoContamination, kInfinity, kInfinity);
  }
  const double target = eta * limit.rate_inf;
  const double lbar = 1.0 + alpha * (cells - 1);
  const double lbar2 = lbar * lbar;
  const double bracket = 1.0 / (lbar2 * (std::pow(1.0 + limit.gamma_inf, eta) - 1.0)) -
                         1.0 / (effective_snr * lbar) - alpha * (lbar - 1.0) / lbar2;
  if (!(bracket > 0.0)) {
    return unresolved(detect::Detector::kMatchedFilter, DofStatus::kInfeasible, target, limit.rate_inf);
  }
  DofRequirement out;
  out.detector = detect::Detector::kMatchedFilter;
  out.dof_per_user = 1.0 / bracket;
  out.target_rate = target;
  out.rate_inf = limit.rate_inf;
  return out;
}

DofRequirement dof_required_mmse_for_rate(double target_rate, double effective_snr, double alpha, int cells,
                                          double lambda, const BisectionOptions& options) {
  if (!(effective_snr > 0.0)) throw ConfigError("effective SNR must be positive");
  if (!(target_rate >= 0.0) || !std::isfinite(target_rate)) throw ConfigError("target rate must be finite");
  const UltimateLimit limit = gamma_rate_infinity(alpha, cells);

  auto meets = [&](double dof) {
    SimpleSystemPoint p{effective_snr, dof, alpha, cells, lambda};
    try {
      return rate_mmse_simple(p) >= target_rate;
    } catch (const SingularityError&) {
      return false;
    }
  };

  DofRequirement out;
  out.detector = detect::Detector::kMmse;
  out.target_rate = target_rate;
  out.rate_inf = limit.rate_inf;

  double lo = 1e3 * DBL_EPSILON;
  if (meets(lo)) {
    out.dof_per_user = lo;
    return out;
  }
  double hi = 1.0;
  while (!meets(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > options.cap) return unresolved(detect::Detector::kMmse, DofStatus::kInfeasible, target_rate, limit.rate_inf);
  }
  while (hi - lo > options.rel_tolerance * hi) {
    const double mid = 0.5 * (lo + hi);
    if (meets(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.dof_per_user = hi;
  return out;
}

DofRequirement dof_required_mmse(double eta, double effective_snr, double alpha, int cells, double lambda,
                                 const BisectionOptions& options) {
  check_eta(eta);
  const UltimateLimit limit = gamma_rate_infinity(alpha, cells);
  if (limit.unbounded()) return unresolved(detect::Detector::kMmse, DofStatus::kNoContamination, kInfinity, kInfinity);
  return dof_required_mmse_for_rate(eta * limit.rate_inf, effective_snr, alpha, cells, lambda, options);
}

}  // namespace mmimo::closedform
