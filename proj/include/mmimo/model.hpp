#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmimo/common.hpp"

/// Multicell uplink system model: configuration, per-link correlation
/// profiles, channel draws and pilot-based MMSE channel estimation.
///
/// Index conventions follow the usual (j, l, k) triple: j is the receiving
/// base station, l the cell of the transmitting user and k the user index
/// inside that cell. All indices are zero based.
namespace mmimo::model {

struct SystemConfig {
  int cells = 1;     // L
  int users = 1;     // K, users per cell
  int antennas = 1;  // N, antennas per base station
  double rho = 1.0;  // transmit SNR, linear
  double rho_tau = kInfinity;  // effective training SNR; infinity means noiseless pilots
  std::uint64_t seed = 0;

  bool noiseless_training() const { return rho_tau == kInfinity; }

  // Throws ConfigError on out-of-range fields.
  void validate() const;
};

/// Marks a profile built by build_simple_profile. Closed-form shortcuts and
/// reports use it; the numerical code never relies on it.
struct SimpleModelTag {
  int dof = 0;        // P
  double alpha = 0.0;
};

/// Correlation matrices R_jlk = F_jlk F_jlk^H stored through their factors
/// F_jlk (N x r, r <= N). PSD holds by construction and rank deficiency is
/// free.
class CorrelationProfile {
 public:
  CorrelationProfile(int cells, int users, int antennas, std::vector<CMatrix> factors,
                     std::optional<SimpleModelTag> tag = std::nullopt);

  /// Factorizes arbitrary Hermitian PSD covariances (indexed like factor()).
  static CorrelationProfile from_covariances(int cells, int users, int antennas,
                                             const std::vector<CMatrix>& covariances);

  int cells() const { return cells_; }
  int users() const { return users_; }
  int antennas() const { return antennas_; }

  const CMatrix& factor(int j, int l, int k) const { return factors_[index(j, l, k)]; }
  CMatrix covariance(int j, int l, int k) const;

  const std::optional<SimpleModelTag>& simple_model() const { return tag_; }

  std::size_t index(int j, int l, int k) const {
    return (static_cast<std::size_t>(j) * cells_ + l) * users_ + k;
  }

 private:
  int cells_;
  int users_;
  int antennas_;
  std::vector<CMatrix> factors_;
  std::optional<SimpleModelTag> tag_;
};

/// Parameters of the angular-bin channel model: own-cell links
/// sqrt(N/P) A, interfering links sqrt(alpha N/P) A.
struct SimpleModelSpec {
  int dof = 1;         // P
  double alpha = 1.0;  // intercell interference factor in (0, 1]
  CMatrix basis;       // A, N x P with orthonormal columns

  /// A = first P columns of the identity.
  static SimpleModelSpec canonical(int antennas, int dof, double alpha);
  /// A = P columns of a Haar-distributed unitary (QR of a Gaussian matrix).
  static SimpleModelSpec random_basis(int antennas, int dof, double alpha, std::uint64_t seed);
  /// P = round(c N), clamped to [1, N].
  static int dof_from_ratio(int antennas, double c);
};

CorrelationProfile build_simple_profile(const SystemConfig& config, const SimpleModelSpec& spec);

/// Identity correlations for own-cell links, gain * I for the others.
CorrelationProfile uniform_profile(const SystemConfig& config, double intercell_gain = 1.0);

// ---------------------------------------------------------------------------
// Technical-condition checks
// ---------------------------------------------------------------------------

struct ProfileCheckOptions {
  double hermitian_tolerance = 1e-12;
  double eigenvalue_floor = -1e-10;
  double norm_bound = 1e6;
};

struct EntryCheck {
  int j = 0, l = 0, k = 0;
  double hermitian_deviation = 0.0;
  double min_eigenvalue = 0.0;
  double spectral_norm = 0.0;
  double normalized_trace = 0.0;
  bool hermitian = true;
  bool psd = true;
  bool bounded = true;
  bool positive_trace = true;

  bool ok() const { return hermitian && psd && bounded && positive_trace; }
};

struct ValidationReport {
  std::vector<EntryCheck> entries;
  std::vector<std::string> violations;  // one message per failed entry, naming (j,l,k)

  bool ok() const { return violations.empty(); }
};

ValidationReport validate_covariances(int cells, int users, int antennas,
                                      const std::function<CMatrix(int, int, int)>& covariance,
                                      const ProfileCheckOptions& options = {});

/// Throws ConfigError when the profile shape does not match the config.
ValidationReport validate_profile(const CorrelationProfile& profile, const SystemConfig& config,
                                  const ProfileCheckOptions& options = {});

// ---------------------------------------------------------------------------
// Random draws
// ---------------------------------------------------------------------------

struct ChannelDraw {
  int cells = 0, users = 0, antennas = 0;
  std::uint64_t seed = 0;
  std::uint64_t draw_index = 0;
  std::vector<CMatrix> channels;  // H_jl (N x K), index j * L + l
  std::vector<CVector> fading;    // w_jlk, indexed like CorrelationProfile::index

  const CMatrix& channel(int j, int l) const {
    return channels[static_cast<std::size_t>(j) * cells + l];
  }
  const CVector& fast_fading(int j, int l, int k) const {
    return fading[(static_cast<std::size_t>(j) * cells + l) * users + k];
  }
};

/// Fast-fading vector w_jlk of draw `draw_index`; length = factor columns.
CVector draw_fading(const CorrelationProfile& profile, std::uint64_t seed, std::uint64_t draw_index,
                    int j, int l, int k);

/// Training noise n_jk of draw `draw_index`.
CVector draw_pilot_noise(int antennas, std::uint64_t seed, std::uint64_t draw_index, int j, int k);

ChannelDraw draw_channels(const CorrelationProfile& profile, std::uint64_t seed,
                          std::uint64_t draw_index);

struct PilotObservation {
  int cells = 0, users = 0;
  std::vector<CVector> pilots;  // y_jk, index j * K + k

  const CVector& at(int j, int k) const { return pilots[static_cast<std::size_t>(j) * users + k]; }
};

PilotObservation draw_pilot_observation(const CorrelationProfile& profile, const ChannelDraw& draw,
                                        const SystemConfig& config);

/// Pilot observations of a single cell, y_jk for all k, drawn directly from
/// the substreams without materializing every channel. Matches
/// draw_pilot_observation bit for bit.
std::vector<CVector> draw_cell_pilots(const CorrelationProfile& profile, const SystemConfig& config,
                                      std::uint64_t draw_index, int j);

// ---------------------------------------------------------------------------
// MMSE channel estimation
// ---------------------------------------------------------------------------

enum class SingularPolicy {
  kPseudoInverse,  // noiseless training with rank-deficient sum uses the pseudo-inverse
  kStrict,         // ... or throws SingularityError
};

/// Deterministic part of the MMSE estimator at base station j: the filters
/// Q_jk and the matrices Phi_jlk = R_jjk Q_jk R_jlk.
struct CellStatistics {
  int cell = 0;
  int cells = 0;
  int users = 0;
  std::vector<CMatrix> filters;  // Q_jk
  std::vector<CMatrix> phi;      // Phi_jlk, index l * K + k

  const CMatrix& filter(int k) const { return filters[k]; }
  const CMatrix& cross(int l, int k) const { return phi[static_cast<std::size_t>(l) * users + k]; }
};

CellStatistics estimator_statistics(const CorrelationProfile& profile, const SystemConfig& config,
                                    int j, SingularPolicy policy = SingularPolicy::kPseudoInverse);

/// Conditional covariance of h_jlk given y_jk: R_jlk - R_jlk Q_jk R_jlk.
/// For l == j this is the estimation-error covariance R_jjk - Phi_jjk.
CMatrix conditional_covariance(const CorrelationProfile& profile, const CellStatistics& stats,
                               int l, int k);

/// Realized estimates at base station j.
struct CellEstimate {
  int cell = 0;
  int cells = 0;
  int users = 0;
  CMatrix estimates;           // Hhat_jj, column k = R_jjk Q_jk y_jk
  std::vector<CVector> means;  // E[h_jlk | y_jk] = R_jlk Q_jk y_jk, index l * K + k

  const CVector& mean(int l, int k) const { return means[static_cast<std::size_t>(l) * users + k]; }
};

CellEstimate estimate_cell(const CorrelationProfile& profile, const CellStatistics& stats,
                           const std::vector<CVector>& pilots);

struct PilotEstimate {
  PilotObservation observation;
  std::vector<CellStatistics> statistics;
  std::vector<CellEstimate> cells;

  const CVector& pilot(int j, int k) const { return observation.at(j, k); }
  const CMatrix& filter(int j, int k) const { return statistics[j].filter(k); }
  const CMatrix& cross(int j, int l, int k) const { return statistics[j].cross(l, k); }
  CVector estimate(int j, int k) const { return cells[j].estimates.col(k); }
  const CVector& mean(int j, int l, int k) const { return cells[j].mean(l, k); }
};

PilotEstimate mmse_estimate(const CorrelationProfile& profile, const PilotObservation& observation,
                            const SystemConfig& config,
                            SingularPolicy policy = SingularPolicy::kPseudoInverse);

}  // namespace mmimo::model
