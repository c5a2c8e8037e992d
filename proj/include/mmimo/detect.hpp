#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mmimo/common.hpp"
#include "mmimo/model.hpp"

/// Linear single-user detection at base station j: matched filter and
/// regularized MMSE receive filters, the SINR of a filter conditioned on the
/// pilot observations, and Monte Carlo ergodic rates.
namespace mmimo::detect {

enum class Detector { kMatchedFilter, kMmse };

std::string_view to_string(Detector d);

/// Deterministic interference statistics of one cell.
struct InterferenceMatrix {
  int cell = 0;
  CMatrix Z;            // sum_k (R_jjk - Phi_jjk) + sum_{l != j} sum_k R_jlk
  CMatrix own_error;    // sum_k C_jjk
  CMatrix cross_error;  // sum_{l != j} sum_k C_jlk, conditional on the pilots
};

InterferenceMatrix interference_matrix(const model::CorrelationProfile& profile,
                                       const model::CellStatistics& stats);

struct LinearFilter {
  Detector kind = Detector::kMatchedFilter;
  double lambda = 0.0;  // MMSE regularizer; zero for the matched filter
  CMatrix vectors;      // column m is r_jm
};

LinearFilter matched_filter(const model::CellEstimate& estimate);

/// r_jm = (Hhat Hhat^H + Z + N lambda I)^{-1} hhat_jm. Throws ConfigError for lambda <= 0.
LinearFilter mmse_filter(const model::CellEstimate& estimate, const InterferenceMatrix& interference, double lambda);

/// Same filter through the push-through identity, reusing W = (Z + N lambda I)^{-1}
/// so each call only factors a K x K matrix.
class MmseFilterCache {
 public:
  MmseFilterCache(const InterferenceMatrix& interference, double lambda);

  LinearFilter operator()(const model::CellEstimate& estimate) const;
  double lambda() const { return lambda_; }

 private:
  double lambda_;
  CMatrix inverse_;
};

/// lambda = 1 / (rho N)
double default_lambda(const model::SystemConfig& config);

/// Conditional SINR of one user. The denominator r^H B r splits into
/// nonnegative parts:
///   noise             (1/rho) |r|^2
///   estimation_error  r^H (sum_k C_jjk) r
///   intracell         sum_{k != m} |r^H hhat_jjk|^2
///   intercell         r^H (sum_{l != j, k} C_jlk) r + sum_{l != j, k != m} |r^H m_jlk|^2
///   contamination     sum_{l != j} |r^H m_jlm|^2
struct SinrTerms {
  double signal = 0.0;
  double noise = 0.0;
  double estimation_error = 0.0;
  double intracell = 0.0;
  double intercell = 0.0;
  double contamination = 0.0;
  double sinr = 0.0;
  bool degenerate = false;  // zero filter or zero denominator; sinr reported as 0

  double denominator() const { return noise + estimation_error + intracell + intercell + contamination; }
  double rate() const;
};

std::vector<SinrTerms> conditional_sinr(const LinearFilter& filter, const model::CellEstimate& estimate,
                                        const InterferenceMatrix& interference, const model::SystemConfig& config);

/// Dense B_jm = (1/rho) I + sum_{k != m} hhat hhat^H + sum_k C_jjk + sum_{l != j, k} (m m^H + C_jlk).
CMatrix conditional_interference(const model::CellEstimate& estimate, const InterferenceMatrix& interference,
                                 const model::SystemConfig& config, int m);

struct DenominatorEstimate {
  RVector mean;       // per user m
  RVector std_error;  // per user m
};

/// Brute-force oracle for the SINR denominator: redraws every channel of
/// cell j from its law conditioned on the pilots, evaluates
/// r^H ((1/rho) I + e e^H - h h^H + sum_l H_jl H_jl^H) r with e the
/// estimation error of the user of interest and averages.
DenominatorEstimate nested_denominator_oracle(const model::CorrelationProfile& profile,
                                              const model::SystemConfig& config,
                                              const model::CellStatistics& stats,
                                              const std::vector<CVector>& pilots, const LinearFilter& filter,
                                              int draws, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Monte Carlo ergodic rates
// ---------------------------------------------------------------------------

struct MonteCarloOptions {
  int trials = 1;
  double lambda = 0.0;     // <= 0 selects default_lambda
  std::vector<int> cells;  // evaluated cells; empty means all
  int threads = 1;
};

/// Per-trial rates for both detectors on the same draws.
/// Rows are trials, columns are users in (cell, user) order.
struct RateSamples {
  std::vector<int> cells;
  int users = 0;
  RMatrix mf;
  RMatrix mmse;
};

struct RateEstimate {
  RVector mean;       // per evaluated user
  RVector std_error;  // per evaluated user
  double network_mean = 0.0;       // mean over users and trials
  double network_std_error = 0.0;  // standard error of the per-trial user average
};

RateSamples simulate_rates(const model::CorrelationProfile& profile, const model::SystemConfig& config,
                           const MonteCarloOptions& options);

RateEstimate summarize(const RMatrix& samples);

RateEstimate ergodic_rate_mc(const model::CorrelationProfile& profile, const model::SystemConfig& config,
                             Detector kind, int trials);

}  // namespace mmimo::detect
