#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mmimo/common.hpp"

/// Deterministic equivalents of resolvent traces.
///
/// For H with independent columns h_k = R_k^{1/2} u_k / sqrt(N), the trace
/// functional (1/N) tr D (H H^H + S + rho I)^{-1} is approximated by
/// (1/N) tr D T(rho), where
///
///   T = ( (1/N) sum_k R_k / (1 + delta_k) + S + rho I )^{-1},
///   delta_k = (1/N) tr R_k T.
///
/// The quadratic functional (1/N) tr D Q Theta Q, Q the resolvent, is
/// approximated by (1/N) tr D T' with T' from solve_derivative().
namespace mmimo::rmt {

struct FixedPointProblem {
  CMatrix D;               // only used by trace functionals
  CMatrix S;               // Hermitian PSD, N x N
  std::vector<CMatrix> R;  // K Hermitian PSD matrices, N x N
  double rho = 1.0;

  Eigen::Index dimension() const { return S.rows(); }
  int size() const { return static_cast<int>(R.size()); }

  /// Throws ConfigError for inconsistent shapes or rho <= 0.
  void validate() const;
};

struct FixedPointOptions {
  double abs_tolerance = 1e-12;
  double rel_tolerance = 1e-12;
  int max_iterations = 10000;
  double damping = 1.0;               // delta <- (1 - damping) delta + damping * update
  std::optional<RVector> initial;     // defaults to 1/rho for every k
  bool damping_fallback = true;       // switch to damping 0.5 on oscillation
};

struct FixedPointSolution {
  CMatrix T;
  RVector delta;
  int iterations = 0;
  double residual = 0.0;  // max_k |delta_k - (1/N) tr R_k T|
};

/// Throws NonConvergenceError when max_iterations is exhausted.
FixedPointSolution solve_fixed_point(const FixedPointProblem& problem, const FixedPointOptions& options = {});

/// T(delta) for a given delta vector.
CMatrix resolvent_equivalent(const FixedPointProblem& problem, const RVector& delta);

struct DerivativeSolution {
  CMatrix T_prime;
  RVector delta_prime;
  RMatrix J;
  RVector v;
  CMatrix Theta;
};

/// Prepares the K x K system shared by every Theta for one fixed point.
/// Building J costs K dense products; each solve() costs three more.
class DerivativeSolver {
 public:
  DerivativeSolver(const FixedPointProblem& problem, const FixedPointSolution& solution);

  /// Throws ConditioningError when I - J is numerically singular.
  DerivativeSolution solve(const CMatrix& Theta) const;

  const RMatrix& J() const { return J_; }

 private:
  const FixedPointProblem& problem_;
  const FixedPointSolution& solution_;
  std::vector<CMatrix> RT_;  // R_k T
  RMatrix J_;
  Eigen::PartialPivLU<RMatrix> lu_;
};

DerivativeSolution solve_derivative(const FixedPointProblem& problem, const FixedPointSolution& solution,
                                    const CMatrix& Theta);

/// (1/N) Re tr(D X)
double trace_functional(const CMatrix& D, const CMatrix& X);

struct OracleEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int draws = 0;
};

/// Monte Carlo estimate of (1/N) tr D Q (linear form, no Theta) or
/// (1/N) tr D Q Theta Q (quadratic form), Q = (H H^H + S + rho I)^{-1}.
OracleEstimate resolvent_trace_oracle(const FixedPointProblem& problem, const std::optional<CMatrix>& Theta,
                                      int draws, std::uint64_t seed);

}  // namespace mmimo::rmt
