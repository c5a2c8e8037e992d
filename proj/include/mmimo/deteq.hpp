#pragma once

#include <vector>

#include "mmimo/common.hpp"
#include "mmimo/model.hpp"
#include "mmimo/rmt.hpp"

/// Large-system deterministic equivalents of the per-user SINR for the
/// matched filter and the MMSE detector, plus the infinite-antenna limit.
/// All traces are normalized by N.
namespace mmimo::deteq {

struct MfUserEquivalent {
  double gamma = 0.0;
  double signal = 0.0;         // ((1/N) tr Phi_jjm)^2
  double noise = 0.0;          // (1/(rho N^2)) tr Phi_jjm
  double interference = 0.0;   // (1/N) sum_{l,k} (1/N) tr R_jlk Phi_jjm
  double contamination = 0.0;  // sum_{l != j} |(1/N) tr Phi_jlm|^2
  bool degenerate = false;     // Phi_jjm = 0
};

struct MfDeterministicEquivalent {
  int cell = 0;
  std::vector<MfUserEquivalent> users;
};

MfDeterministicEquivalent de_sinr_mf(const model::CorrelationProfile& profile, const model::CellStatistics& stats,
                                     const model::SystemConfig& config);

struct MmseUserEquivalent {
  double gamma = 0.0;
  double delta = 0.0;          // delta_jm, numerator is delta^2
  double noise = 0.0;          // (1/(rho N^2)) tr Phi_jjm Tbar'_j
  double interference = 0.0;   // (1/N) sum_{l,k} mu_jlkm
  double contamination = 0.0;  // sum_{l != j} |vartheta_jlm|^2
  RVector delta_prime;         // delta'_jkm over k, from Theta = Phi_jjm
  Eigen::MatrixXcd vartheta_prime;  // (l, k) -> (1/N) tr Phi_jlk T'_jm
  RMatrix mu;                       // (l, k) -> mu_jlkm
};

struct MmseDeterministicEquivalent {
  int cell = 0;
  double lambda = 0.0;
  rmt::FixedPointSolution fixed_point;  // T_j, delta_j for D = I, S = Z_j / N, R_k = Phi_jjk at lambda
  CMatrix identity_derivative;          // Tbar'_j (Theta = I)
  Eigen::MatrixXcd vartheta;            // (l, k) -> (1/N) tr Phi_jlk T_j
  std::vector<MmseUserEquivalent> users;
};

/// Propagates rmt::NonConvergenceError and rmt::ConditioningError.
MmseDeterministicEquivalent de_sinr_mmse(const model::CorrelationProfile& profile,
                                         const model::CellStatistics& stats, const model::SystemConfig& config,
                                         double lambda, const rmt::FixedPointOptions& options = {});

double de_rate(double gamma);

struct AsymptoticLimit {
  int cell = 0;
  Eigen::MatrixXcd beta;  // (l, k) -> (1/N) tr Phi_jlk
  RVector gamma_inf;      // per user; kInfinity without pilot contamination
};

AsymptoticLimit asymptotic_sir(const model::CellStatistics& stats);

}  // namespace mmimo::deteq
