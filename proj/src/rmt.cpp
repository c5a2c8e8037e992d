#include "mmimo/rmt.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mmimo/linalg.hpp"
#include "mmimo/rng.hpp"
#include "mmimo/stats.hpp"

namespace mmimo::rmt {

void FixedPointProblem::validate() const {
  const Eigen::Index n = S.rows();
  if (n < 1 || S.cols() != n) throw ConfigError("S must be a nonempty square matrix");
  if (D.size() != 0 && (D.rows() != n || D.cols() != n)) throw ConfigError("D must match S");
  for (const CMatrix& r : R) {
    if (r.rows() != n || r.cols() != n) throw ConfigError("every R_k must match S");
  }
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("rho must be positive and finite");
}

CMatrix resolvent_equivalent(const FixedPointProblem& problem, const RVector& delta) {
  const Eigen::Index n = problem.dimension();
  CMatrix m = problem.S;
  m.diagonal().array() += problem.rho;
  for (int k = 0; k < problem.size(); ++k) m += problem.R[k] * (1.0 / (n * (1.0 + delta(k))));
  return linalg::hermitian_part(linalg::hpd_inverse(linalg::hermitian_part(m)));
}

namespace {

RVector trace_update(const FixedPointProblem& problem, const CMatrix& T) {
  const double n = static_cast<double>(problem.dimension());
  RVector update(problem.size());
  for (int k = 0; k < problem.size(); ++k) update(k) = linalg::trace_product(problem.R[k], T).real() / n;
  return update;
}

double sup_distance(const RVector& a, const RVector& b) {
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

double sup_norm(const RVector& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace

FixedPointSolution solve_fixed_point(const FixedPointProblem& problem, const FixedPointOptions& options) {
  problem.validate();
  const int users = problem.size();
  if (!(options.abs_tolerance > 0.0 || options.rel_tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (!(options.damping > 0.0 && options.damping <= 1.0)) throw ConfigError("damping must lie in (0, 1]");

  RVector delta = options.initial.value_or(RVector::Constant(users, 1.0 / problem.rho));
  if (delta.size() != users) throw ConfigError("initial delta has the wrong length");
  if (users > 0 && delta.minCoeff() < 0.0) throw ConfigError("initial delta must be nonnegative");

  double damping = options.damping;
  double previous_step = kInfinity;
  int growth = 0;
  double step = kInfinity;

  for (int it = 1; it <= options.max_iterations; ++it) {
    const CMatrix T = resolvent_equivalent(problem, delta);
    const RVector update = trace_update(problem, T);
    step = sup_distance(update, delta);
    const double scale = std::max(sup_norm(update), sup_norm(delta));
    if (step <= options.abs_tolerance + options.rel_tolerance * scale) {
      FixedPointSolution sol;
      sol.delta = update;
      sol.T = resolvent_equivalent(problem, sol.delta);
      sol.iterations = it;
      sol.residual = sup_distance(sol.delta, trace_update(problem, sol.T));
      return sol;
    }
    if (options.damping_fallback && damping == 1.0) {
      growth = step > previous_step ? growth + 1 : 0;
      if (growth >= 3) damping = 0.5;
    }
    previous_step = step;
    delta = (1.0 - damping) * delta + damping * update;
  }
  std::ostringstream msg;
  msg << "fixed point did not converge in " << options.max_iterations << " iterations (last step " << step << ")";
  throw NonConvergenceError(msg.str(), options.max_iterations, step);
}

DerivativeSolver::DerivativeSolver(const FixedPointProblem& problem, const FixedPointSolution& solution)
    : problem_(problem), solution_(solution) {
  const int users = problem.size();
  const double n = static_cast<double>(problem.dimension());
  RT_.reserve(users);
  for (int k = 0; k < users; ++k) RT_.push_back(problem.R[k] * solution.T);

  // d delta_k / d delta_l carries the (1 + delta_l)^-2 factor of the l-th term of T.
  J_.resize(users, users);
  for (int k = 0; k < users; ++k) {
    for (int l = k; l < users; ++l) {
      const double t = linalg::trace_product(RT_[k], RT_[l]).real() / n;
      J_(k, l) = t / (n * std::pow(1.0 + solution.delta(l), 2));
      J_(l, k) = t / (n * std::pow(1.0 + solution.delta(k), 2));
    }
  }
  if (users > 0) {
    const RMatrix system = RMatrix::Identity(users, users) - J_;
    Eigen::JacobiSVD<RMatrix> svd(system);
    const double smallest = svd.singularValues().minCoeff();
    if (!(smallest > 1e-12)) {
      std::ostringstream msg;
      msg << "I - J is numerically singular (smallest singular value " << smallest << ")";
      throw ConditioningError(msg.str(), smallest);
    }
    lu_.compute(system);
  }
}

DerivativeSolution DerivativeSolver::solve(const CMatrix& Theta) const {
  const Eigen::Index n = problem_.dimension();
  if (Theta.rows() != n || Theta.cols() != n) throw ConfigError("Theta must be N x N");
  const int users = problem_.size();
  const CMatrix& T = solution_.T;

  DerivativeSolution out;
  out.Theta = Theta;
  out.J = J_;
  const CMatrix theta_t = Theta * T;
  out.v.resize(users);
  for (int k = 0; k < users; ++k) out.v(k) = linalg::trace_product(RT_[k], theta_t).real() / n;
  out.delta_prime = users > 0 ? RVector(lu_.solve(out.v)) : RVector();

  CMatrix inner = Theta;
  for (int k = 0; k < users; ++k) {
    inner += problem_.R[k] * (out.delta_prime(k) / (n * std::pow(1.0 + solution_.delta(k), 2)));
  }
  out.T_prime = linalg::hermitian_part(T * inner * T);
  return out;
}

DerivativeSolution solve_derivative(const FixedPointProblem& problem, const FixedPointSolution& solution,
                                    const CMatrix& Theta) {
  return DerivativeSolver(problem, solution).solve(Theta);
}

double trace_functional(const CMatrix& D, const CMatrix& X) {
  return linalg::trace_product(D, X).real() / static_cast<double>(X.rows());
}

OracleEstimate resolvent_trace_oracle(const FixedPointProblem& problem, const std::optional<CMatrix>& Theta,
                                      int draws, std::uint64_t seed) {
  problem.validate();
  if (draws < 2) throw ConfigError("oracle needs at least two draws");
  const Eigen::Index n = problem.dimension();
  const int users = problem.size();
  const CMatrix D = problem.D.size() ? problem.D : CMatrix::Identity(n, n);

  std::vector<CMatrix> roots;
  roots.reserve(users);
  for (const CMatrix& r : problem.R) roots.push_back(linalg::psd_sqrt(r) / std::sqrt(static_cast<double>(n)));

  stats::RunningMean acc;
  for (int d = 0; d < draws; ++d) {
    auto engine = rng::substream(seed, rng::Purpose::kResolventOracle, {static_cast<std::uint64_t>(d)});
    CMatrix h(n, users);
    for (int k = 0; k < users; ++k) h.col(k) = roots[k] * rng::circular_gaussian(engine, n);
    CMatrix m = problem.S;
    m.diagonal().array() += problem.rho;
    if (users > 0) m.noalias() += h * h.adjoint();
    const CMatrix q = linalg::hpd_inverse(linalg::hermitian_part(m));
    const double value = Theta ? trace_functional(D, q * (*Theta) * q) : trace_functional(D, q);
    acc.add(value);
  }
  return {acc.mean(), acc.std_error(), draws};
}

}  // namespace mmimo::rmt
