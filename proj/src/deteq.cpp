#include "mmimo/deteq.hpp"

#include <cmath>

#include "mmimo/detect.hpp"
#include "mmimo/linalg.hpp"

namespace mmimo::deteq {

using model::CellStatistics;
using model::CorrelationProfile;
using model::SystemConfig;

namespace {

CMatrix summed_covariance(const CorrelationProfile& profile, int j) {
  const int n = profile.antennas();
  CMatrix sum = CMatrix::Zero(n, n);
  for (int l = 0; l < profile.cells(); ++l) {
    for (int k = 0; k < profile.users(); ++k) {
      const CMatrix& f = profile.factor(j, l, k);
      sum.noalias() += f * f.adjoint();
    }
  }
  return sum;
}

}  // namespace

MfDeterministicEquivalent de_sinr_mf(const CorrelationProfile& profile, const CellStatistics& stats,
                                     const SystemConfig& config) {
  const double n = profile.antennas();
  const int j = stats.cell;
  const CMatrix r_sum = summed_covariance(profile, j);

  MfDeterministicEquivalent out;
  out.cell = j;
  out.users.resize(stats.users);
  for (int m = 0; m < stats.users; ++m) {
    const CMatrix& phi = stats.cross(j, m);
    MfUserEquivalent& u = out.users[m];
    const double power = phi.trace().real() / n;
    u.signal = power * power;
    u.noise = power / (config.rho * n);
    u.interference = linalg::trace_product(r_sum, phi).real() / (n * n);
    for (int l = 0; l < stats.cells; ++l) {
      if (l != j) u.contamination += std::norm(stats.cross(l, m).trace() / n);
    }
    const double den = u.noise + u.interference + u.contamination;
    u.degenerate = !(power > 0.0) || !(den > 0.0);
    u.gamma = u.degenerate ? 0.0 : u.signal / den;
  }
  return out;
}

MmseDeterministicEquivalent de_sinr_mmse(const CorrelationProfile& profile, const CellStatistics& stats,
                                         const SystemConfig& config, double lambda,
                                         const rmt::FixedPointOptions& options) {
  if (!(lambda > 0.0)) throw ConfigError("MMSE regularizer must be positive");
  const int n = profile.antennas();
  const double nd = n;
  const int j = stats.cell;
  const int cells = stats.cells;
  const int users = stats.users;

  const detect::InterferenceMatrix interference = detect::interference_matrix(profile, stats);

  rmt::FixedPointProblem problem;
  problem.D = CMatrix::Identity(n, n);
  problem.S = interference.Z / nd;
  problem.rho = lambda;
  problem.R.reserve(users);
  for (int k = 0; k < users; ++k) problem.R.push_back(stats.cross(j, k));

  MmseDeterministicEquivalent out;
  out.cell = j;
  out.lambda = lambda;
  out.fixed_point = rmt::solve_fixed_point(problem, options);
  const CMatrix& T = out.fixed_point.T;
  const RVector& delta = out.fixed_point.delta;

  const rmt::DerivativeSolver derivative(problem, out.fixed_point);
  out.identity_derivative = derivative.solve(CMatrix::Identity(n, n)).T_prime;

  out.vartheta.resize(cells, users);
  for (int l = 0; l < cells; ++l)
    for (int k = 0; k < users; ++k) out.vartheta(l, k) = linalg::trace_product(stats.cross(l, k), T) / nd;

  std::vector<CMatrix> covariances;
  covariances.reserve(static_cast<std::size_t>(cells) * users);
  for (int l = 0; l < cells; ++l)
    for (int k = 0; k < users; ++k) covariances.push_back(profile.covariance(j, l, k));

  out.users.resize(users);
  for (int m = 0; m < users; ++m) {
    const CMatrix& phi = stats.cross(j, m);
    const rmt::DerivativeSolution d = derivative.solve(phi);
    MmseUserEquivalent& u = out.users[m];
    u.delta = delta(m);
    u.delta_prime = d.delta_prime;
    u.vartheta_prime.resize(cells, users);
    u.mu.resize(cells, users);
    double mu_sum = 0.0;
    for (int l = 0; l < cells; ++l) {
      for (int k = 0; k < users; ++k) {
        const Complex vt = out.vartheta(l, k);
        const Complex vtp = linalg::trace_product(stats.cross(l, k), d.T_prime) / nd;
        const double quad = linalg::trace_product(covariances[static_cast<std::size_t>(l) * users + k], d.T_prime).real() / nd;
        const double g = 1.0 + delta(k);
        const double correction = (2.0 * (std::conj(vt) * vtp).real() * g - std::norm(vt) * d.delta_prime(k)) / (g * g);
        u.vartheta_prime(l, k) = vtp;
        u.mu(l, k) = quad - correction;
        mu_sum += u.mu(l, k);
      }
    }
    u.noise = linalg::trace_product(phi, out.identity_derivative).real() / (config.rho * nd * nd);
    u.interference = mu_sum / nd;
    for (int l = 0; l < cells; ++l) {
      if (l != j) u.contamination += std::norm(out.vartheta(l, m));
    }
    const double den = u.noise + u.interference + u.contamination;
    u.gamma = den > 0.0 ? u.delta * u.delta / den : 0.0;
  }
  return out;
}

double de_rate(double gamma) {
  if (gamma < 0.0) throw ConfigError("SINR must be nonnegative");
  return std::log2(1.0 + gamma);
}

AsymptoticLimit asymptotic_sir(const CellStatistics& stats) {
  AsymptoticLimit out;
  out.cell = stats.cell;
  out.beta.resize(stats.cells, stats.users);
  const double n = static_cast<double>(stats.cross(stats.cell, 0).rows());
  for (int l = 0; l < stats.cells; ++l)
    for (int k = 0; k < stats.users; ++k) out.beta(l, k) = stats.cross(l, k).trace() / n;
  out.gamma_inf.resize(stats.users);
  for (int m = 0; m < stats.users; ++m) {
    double contamination = 0.0;
    for (int l = 0; l < stats.cells; ++l) {
      if (l != stats.cell) contamination += std::norm(out.beta(l, m));
    }
    const double own = std::norm(out.beta(stats.cell, m));
    out.gamma_inf(m) = contamination > 0.0 ? own / contamination : kInfinity;
  }
  return out;
}

}  // namespace mmimo::deteq
