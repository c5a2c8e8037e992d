#include "mmimo/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mmimo/linalg.hpp"
#include "mmimo/rng.hpp"

namespace mmimo::model {

void SystemConfig::validate() const {
  if (cells < 1) throw ConfigError("cell count must be >= 1");
  if (users < 1) throw ConfigError("users per cell must be >= 1");
  if (antennas < 1) throw ConfigError("antenna count must be >= 1");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("transmit SNR must be positive and finite");
  if (!(rho_tau > 0.0)) throw ConfigError("training SNR must be positive or infinite");
}

CorrelationProfile::CorrelationProfile(int cells, int users, int antennas, std::vector<CMatrix> factors,
                                       std::optional<SimpleModelTag> tag)
    : cells_(cells), users_(users), antennas_(antennas), factors_(std::move(factors)), tag_(tag) {
  if (cells < 1 || users < 1 || antennas < 1) throw ConfigError("profile dimensions must be positive");
  const std::size_t expected = static_cast<std::size_t>(cells) * cells * users;
  if (factors_.size() != expected) {
    std::ostringstream msg;
    msg << "profile holds " << factors_.size() << " factors, expected L*L*K = " << expected;
    throw ConfigError(msg.str());
  }
  for (const CMatrix& f : factors_) {
    if (f.rows() != antennas || f.cols() < 1 || f.cols() > antennas) {
      std::ostringstream msg;
      msg << "correlation factor of shape " << f.rows() << "x" << f.cols() << " does not fit N = " << antennas;
      throw ConfigError(msg.str());
    }
  }
}

CorrelationProfile CorrelationProfile::from_covariances(int cells, int users, int antennas,
                                                        const std::vector<CMatrix>& covariances) {
  std::vector<CMatrix> factors;
  factors.reserve(covariances.size());
  for (const CMatrix& r : covariances) {
    if (r.rows() != antennas || r.cols() != antennas) throw ConfigError("covariance must be N x N");
    factors.push_back(linalg::psd_sqrt(r));
  }
  return CorrelationProfile(cells, users, antennas, std::move(factors));
}

CMatrix CorrelationProfile::covariance(int j, int l, int k) const {
  const CMatrix& f = factor(j, l, k);
  return f * f.adjoint();
}

SimpleModelSpec SimpleModelSpec::canonical(int antennas, int dof, double alpha) {
  if (dof < 1 || dof > antennas) throw ConfigError("need 1 <= P <= N");
  return {dof, alpha, CMatrix::Identity(antennas, dof)};
}

SimpleModelSpec SimpleModelSpec::random_basis(int antennas, int dof, double alpha, std::uint64_t seed) {
  if (dof < 1 || dof > antennas) throw ConfigError("need 1 <= P <= N");
  auto engine = rng::substream(seed, rng::Purpose::kTestInstance, {0x5A5AULL});
  const CMatrix g = rng::circular_gaussian(engine, antennas, antennas);
  Eigen::HouseholderQR<CMatrix> qr(g);
  const CMatrix q = qr.householderQ() * CMatrix::Identity(antennas, dof);
  return {dof, alpha, q};
}

int SimpleModelSpec::dof_from_ratio(int antennas, double c) {
  const int p = static_cast<int>(std::lround(c * antennas));
  return std::clamp(p, 1, antennas);
}

CorrelationProfile build_simple_profile(const SystemConfig& config, const SimpleModelSpec& spec) {
  config.validate();
  const int n = config.antennas;
  if (spec.dof < 1 || spec.dof > n) {
    std::ostringstream msg;
    msg << "simple model needs 1 <= P <= N, got P = " << spec.dof << ", N = " << n;
    throw ConfigError(msg.str());
  }
  if (!(spec.alpha > 0.0 && spec.alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (spec.basis.rows() != n || spec.basis.cols() != spec.dof) throw ConfigError("basis must be N x P");
  const CMatrix gram = spec.basis.adjoint() * spec.basis;
  if ((gram - CMatrix::Identity(spec.dof, spec.dof)).norm() > 1e-10) {
    throw ConfigError("basis columns are not orthonormal");
  }

  const double scale = static_cast<double>(n) / spec.dof;
  const CMatrix own = std::sqrt(scale) * spec.basis;
  const CMatrix other = std::sqrt(spec.alpha * scale) * spec.basis;

  const int cells = config.cells;
  const int users = config.users;
  std::vector<CMatrix> factors;
  factors.reserve(static_cast<std::size_t>(cells) * cells * users);
  for (int j = 0; j < cells; ++j)
    for (int l = 0; l < cells; ++l)
      for (int k = 0; k < users; ++k) factors.push_back(l == j ? own : other);
  return CorrelationProfile(cells, users, n, std::move(factors), SimpleModelTag{spec.dof, spec.alpha});
}

CorrelationProfile uniform_profile(const SystemConfig& config, double intercell_gain) {
  config.validate();
  const int n = config.antennas;
  const CMatrix own = CMatrix::Identity(n, n);
  const CMatrix other = std::sqrt(intercell_gain) * own;
  std::vector<CMatrix> factors;
  for (int j = 0; j < config.cells; ++j)
    for (int l = 0; l < config.cells; ++l)
      for (int k = 0; k < config.users; ++k) factors.push_back(l == j ? own : other);
  return CorrelationProfile(config.cells, config.users, n, std::move(factors));
}

ValidationReport validate_covariances(int cells, int users, int antennas,
                                      const std::function<CMatrix(int, int, int)>& covariance,
                                      const ProfileCheckOptions& options) {
  ValidationReport report;
  for (int j = 0; j < cells; ++j) {
    for (int l = 0; l < cells; ++l) {
      for (int k = 0; k < users; ++k) {
        const CMatrix r = covariance(j, l, k);
        if (r.rows() != antennas || r.cols() != antennas) {
          std::ostringstream msg;
          msg << "R[" << j << "," << l << "," << k << "] has shape " << r.rows() << "x" << r.cols()
              << ", expected " << antennas << "x" << antennas;
          throw ConfigError(msg.str());
        }
        EntryCheck e;
        e.j = j;
        e.l = l;
        e.k = k;
        e.hermitian_deviation = linalg::hermitian_deviation(r);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(linalg::hermitian_part(r), Eigen::EigenvaluesOnly);
        e.min_eigenvalue = es.eigenvalues().minCoeff();
        e.spectral_norm = es.eigenvalues().cwiseAbs().maxCoeff();
        e.normalized_trace = r.trace().real() / antennas;
        e.hermitian = e.hermitian_deviation <= options.hermitian_tolerance;
        e.psd = e.min_eigenvalue >= options.eigenvalue_floor;
        e.bounded = e.spectral_norm <= options.norm_bound;
        e.positive_trace = e.normalized_trace > 0.0;
        if (!e.ok()) {
          std::ostringstream msg;
          msg << "R[" << j << "," << l << "," << k << "]:";
          if (!e.hermitian) msg << " not Hermitian (deviation " << e.hermitian_deviation << ")";
          if (!e.psd) msg << " negative eigenvalue " << e.min_eigenvalue;
          if (!e.bounded) msg << " spectral norm " << e.spectral_norm << " exceeds bound " << options.norm_bound;
          if (!e.positive_trace) msg << " normalized trace " << e.normalized_trace << " not positive";
          report.violations.push_back(msg.str());
        }
        report.entries.push_back(e);
      }
    }
  }
  return report;
}

ValidationReport validate_profile(const CorrelationProfile& profile, const SystemConfig& config,
                                  const ProfileCheckOptions& options) {
  if (profile.cells() != config.cells || profile.users() != config.users ||
      profile.antennas() != config.antennas) {
    std::ostringstream msg;
    msg << "profile (L=" << profile.cells() << ", K=" << profile.users() << ", N=" << profile.antennas()
        << ") does not match config (L=" << config.cells << ", K=" << config.users
        << ", N=" << config.antennas << ")";
    throw ConfigError(msg.str());
  }
  return validate_covariances(
      profile.cells(), profile.users(), profile.antennas(),
      [&](int j, int l, int k) { return profile.covariance(j, l, k); }, options);
}

CVector draw_fading(const CorrelationProfile& profile, std::uint64_t seed, std::uint64_t draw_index, int j,
                    int l, int k) {
  auto engine = rng::substream(seed, rng::Purpose::kFading,
                               {draw_index, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(l),
                                static_cast<std::uint64_t>(k)});
  return rng::circular_gaussian(engine, profile.factor(j, l, k).cols());
}

CVector draw_pilot_noise(int antennas, std::uint64_t seed, std::uint64_t draw_index, int j, int k) {
  auto engine = rng::substream(seed, rng::Purpose::kPilotNoise,
                               {draw_index, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(k)});
  return rng::circular_gaussian(engine, antennas);
}

ChannelDraw draw_channels(const CorrelationProfile& profile, std::uint64_t seed, std::uint64_t draw_index) {
  ChannelDraw draw;
  draw.cells = profile.cells();
  draw.users = profile.users();
  draw.antennas = profile.antennas();
  draw.seed = seed;
  draw.draw_index = draw_index;
  draw.channels.reserve(static_cast<std::size_t>(draw.cells) * draw.cells);
  draw.fading.reserve(static_cast<std::size_t>(draw.cells) * draw.cells * draw.users);
  for (int j = 0; j < draw.cells; ++j) {
    for (int l = 0; l < draw.cells; ++l) {
      CMatrix h(draw.antennas, draw.users);
      for (int k = 0; k < draw.users; ++k) {
        CVector w = draw_fading(profile, seed, draw_index, j, l, k);
        const CVector column = profile.factor(j, l, k) * w;
        h.col(k) = column;
        draw.fading.push_back(std::move(w));
      }
      draw.channels.push_back(std::move(h));
    }
  }
  return draw;
}

namespace {

void add_pilot_noise(CVector& y, const SystemConfig& config, std::uint64_t seed, std::uint64_t draw_index,
                     int j, int k) {
  if (config.noiseless_training()) return;
  const CVector n = draw_pilot_noise(static_cast<int>(y.size()), seed, draw_index, j, k);
  y += n * (1.0 / std::sqrt(config.rho_tau));
}

}  // namespace

PilotObservation draw_pilot_observation(const CorrelationProfile& profile, const ChannelDraw& draw,
                                        const SystemConfig& config) {
  if (!(config.rho_tau > 0.0)) throw ConfigError("training SNR must be positive or infinite");
  PilotObservation obs;
  obs.cells = profile.cells();
  obs.users = profile.users();
  obs.pilots.reserve(static_cast<std::size_t>(obs.cells) * obs.users);
  for (int j = 0; j < obs.cells; ++j) {
    for (int k = 0; k < obs.users; ++k) {
      CVector y = CVector::Zero(profile.antennas());
      for (int l = 0; l < obs.cells; ++l) y += draw.channel(j, l).col(k);
      add_pilot_noise(y, config, draw.seed, draw.draw_index, j, k);
      obs.pilots.push_back(std::move(y));
    }
  }
  return obs;
}

std::vector<CVector> draw_cell_pilots(const CorrelationProfile& profile, const SystemConfig& config,
                                      std::uint64_t draw_index, int j) {
  std::vector<CVector> pilots;
  pilots.reserve(profile.users());
  for (int k = 0; k < profile.users(); ++k) {
    CVector y = CVector::Zero(profile.antennas());
    for (int l = 0; l < profile.cells(); ++l) {
      const CVector w = draw_fading(profile, config.seed, draw_index, j, l, k);
      const CVector column = profile.factor(j, l, k) * w;
      y += column;
    }
    add_pilot_noise(y, config, config.seed, draw_index, j, k);
    pilots.push_back(std::move(y));
  }
  return pilots;
}

CellStatistics estimator_statistics(const CorrelationProfile& profile, const SystemConfig& config, int j,
                                    SingularPolicy policy) {
  const int n = profile.antennas();
  const int cells = profile.cells();
  const int users = profile.users();
  if (j < 0 || j >= cells) throw ConfigError("cell index out of range");

  CellStatistics stats;
  stats.cell = j;
  stats.cells = cells;
  stats.users = users;
  stats.filters.reserve(users);
  stats.phi.resize(static_cast<std::size_t>(cells) * users);

  for (int k = 0; k < users; ++k) {
    CMatrix total = CMatrix::Zero(n, n);
    for (int l = 0; l < cells; ++l) {
      const CMatrix& f = profile.factor(j, l, k);
      total.noalias() += f * f.adjoint();
    }
    CMatrix q;
    if (!config.noiseless_training()) {
      total.diagonal().array() += 1.0 / config.rho_tau;
      q = linalg::hpd_inverse(total);
    } else if (linalg::psd_rank(total) == n) {
      q = linalg::hpd_inverse(total);
    } else if (policy == SingularPolicy::kPseudoInverse) {
      q = linalg::psd_pseudo_inverse(total);
    } else {
      std::ostringstream msg;
      msg << "sum of correlations for (j=" << j << ", k=" << k << ") is singular under noiseless training";
      throw SingularityError(msg.str());
    }
    q = linalg::hermitian_part(q);

    const CMatrix& own = profile.factor(j, j, k);
    const CMatrix own_q = own.adjoint() * q;  // r x N
    for (int l = 0; l < cells; ++l) {
      const CMatrix& f = profile.factor(j, l, k);
      const CMatrix inner = own_q * f;  // r x r'
      CMatrix phi = own * (inner * f.adjoint());
      if (l == j) phi = linalg::hermitian_part(phi);
      stats.phi[static_cast<std::size_t>(l) * users + k] = std::move(phi);
    }
    stats.filters.push_back(std::move(q));
  }
  return stats;
}

CMatrix conditional_covariance(const CorrelationProfile& profile, const CellStatistics& stats, int l, int k) {
  const CMatrix& f = profile.factor(stats.cell, l, k);
  const CMatrix inner = f.adjoint() * stats.filter(k) * f;
  const CMatrix c = f * (CMatrix::Identity(f.cols(), f.cols()) - inner) * f.adjoint();
  return linalg::hermitian_part(c);
}

CellEstimate estimate_cell(const CorrelationProfile& profile, const CellStatistics& stats,
                           const std::vector<CVector>& pilots) {
  const int n = profile.antennas();
  if (static_cast<int>(pilots.size()) != stats.users) throw ConfigError("need one pilot observation per user");
  CellEstimate est;
  est.cell = stats.cell;
  est.cells = stats.cells;
  est.users = stats.users;
  est.estimates.resize(n, stats.users);
  est.means.resize(static_cast<std::size_t>(stats.cells) * stats.users);
  for (int k = 0; k < stats.users; ++k) {
    const CVector q = stats.filter(k) * pilots[k];
    for (int l = 0; l < stats.cells; ++l) {
      const CMatrix& f = profile.factor(stats.cell, l, k);
      const CVector proj = f.adjoint() * q;
      est.means[static_cast<std::size_t>(l) * stats.users + k] = f * proj;
    }
    est.estimates.col(k) = est.mean(stats.cell, k);
  }
  return est;
}

PilotEstimate mmse_estimate(const CorrelationProfile& profile, const PilotObservation& observation,
                            const SystemConfig& config, SingularPolicy policy) {
  PilotEstimate out;
  out.observation = observation;
  for (int j = 0; j < profile.cells(); ++j) {
    CellStatistics stats = estimator_statistics(profile, config, j, policy);
    std::vector<CVector> pilots(observation.pilots.begin() + static_cast<std::ptrdiff_t>(j) * profile.users(),
                                observation.pilots.begin() + static_cast<std::ptrdiff_t>(j + 1) * profile.users());
    out.cells.push_back(estimate_cell(profile, stats, pilots));
    out.statistics.push_back(std::move(stats));
  }
  return out;
}

}  // namespace mmimo::model
