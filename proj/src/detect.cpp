#include "mmimo/detect.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "mmimo/linalg.hpp"
#include "mmimo/rng.hpp"
#include "mmimo/stats.hpp"

namespace mmimo::detect {

using model::CellEstimate;
using model::CellStatistics;
using model::CorrelationProfile;
using model::SystemConfig;

std::string_view to_string(Detector d) {
  switch (d) {
    case Detector::kMatchedFilter:
      return "mf";
    case Detector::kMmse:
      return "mmse";
  }
  return "?";
}

InterferenceMatrix interference_matrix(const CorrelationProfile& profile, const CellStatistics& stats) {
  const int n = profile.antennas();
  const int j = stats.cell;
  InterferenceMatrix out;
  out.cell = j;
  out.own_error = CMatrix::Zero(n, n);
  out.cross_error = CMatrix::Zero(n, n);
  CMatrix other = CMatrix::Zero(n, n);
  for (int k = 0; k < stats.users; ++k) {
    out.own_error += model::conditional_covariance(profile, stats, j, k);
    for (int l = 0; l < stats.cells; ++l) {
      if (l == j) continue;
      out.cross_error += model::conditional_covariance(profile, stats, l, k);
      const CMatrix& f = profile.factor(j, l, k);
      other.noalias() += f * f.adjoint();
    }
  }
  out.own_error = linalg::hermitian_part(out.own_error);
  out.cross_error = linalg::hermitian_part(out.cross_error);
  out.Z = linalg::hermitian_part(out.own_error + other);
  return out;
}

LinearFilter matched_filter(const CellEstimate& estimate) {
  return {Detector::kMatchedFilter, 0.0, estimate.estimates};
}

LinearFilter mmse_filter(const CellEstimate& estimate, const InterferenceMatrix& interference, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("MMSE regularizer must be positive");
  const CMatrix& hhat = estimate.estimates;
  const Eigen::Index n = hhat.rows();
  CMatrix m = interference.Z;
  m.noalias() += hhat * hhat.adjoint();
  m.diagonal().array() += static_cast<double>(n) * lambda;
  Eigen::LLT<CMatrix> llt(linalg::hermitian_part(m));
  if (llt.info() != Eigen::Success) throw SingularityError("MMSE filter matrix is not positive definite");
  return {Detector::kMmse, lambda, llt.solve(hhat)};
}

MmseFilterCache::MmseFilterCache(const InterferenceMatrix& interference, double lambda) : lambda_(lambda) {
  if (!(lambda > 0.0)) throw ConfigError("MMSE regularizer must be positive");
  CMatrix base = interference.Z;
  base.diagonal().array() += static_cast<double>(base.rows()) * lambda;
  inverse_ = linalg::hpd_inverse(linalg::hermitian_part(base));
}

LinearFilter MmseFilterCache::operator()(const CellEstimate& estimate) const {
  // (H H^H + B)^{-1} H = B^{-1} H (I + H^H B^{-1} H)^{-1}
  const CMatrix& hhat = estimate.estimates;
  const CMatrix wh = inverse_ * hhat;
  CMatrix small = hhat.adjoint() * wh;
  small.diagonal().array() += 1.0;
  Eigen::LLT<CMatrix> llt(linalg::hermitian_part(small));
  if (llt.info() != Eigen::Success) throw SingularityError("MMSE filter matrix is not positive definite");
  return {Detector::kMmse, lambda_, wh * llt.solve(CMatrix::Identity(hhat.cols(), hhat.cols()))};
}

double default_lambda(const SystemConfig& config) { return 1.0 / (config.rho * config.antennas); }

double SinrTerms::rate() const { return std::log2(1.0 + sinr); }

std::vector<SinrTerms> conditional_sinr(const LinearFilter& filter, const CellEstimate& estimate,
                                        const InterferenceMatrix& interference, const SystemConfig& config) {
  const CMatrix& r = filter.vectors;
  const int users = estimate.users;
  const int j = estimate.cell;
  if (r.cols() != users || r.rows() != estimate.estimates.rows()) throw ConfigError("filter does not match estimate");

  const CMatrix gain = r.adjoint() * estimate.estimates;  // (m, k) -> r_m^H hhat_k
  const CMatrix own = interference.own_error * r;
  const CMatrix cross = interference.cross_error * r;

  std::vector<CMatrix> cross_gain;
  for (int l = 0; l < estimate.cells; ++l) {
    if (l == j) continue;
    CMatrix means(r.rows(), users);
    for (int k = 0; k < users; ++k) means.col(k) = estimate.mean(l, k);
    cross_gain.push_back(r.adjoint() * means);
  }

  std::vector<SinrTerms> out(users);
  for (int m = 0; m < users; ++m) {
    SinrTerms& t = out[m];
    const double filter_energy = r.col(m).squaredNorm();
    t.signal = std::norm(gain(m, m));
    t.noise = filter_energy / config.rho;
    t.estimation_error = std::max(0.0, r.col(m).dot(own.col(m)).real());
    t.intercell = std::max(0.0, r.col(m).dot(cross.col(m)).real());
    for (int k = 0; k < users; ++k) {
      if (k != m) t.intracell += std::norm(gain(m, k));
    }
    for (const CMatrix& g : cross_gain) {
      for (int k = 0; k < users; ++k) {
        if (k == m) {
          t.contamination += std::norm(g(m, k));
        } else {
          t.intercell += std::norm(g(m, k));
        }
      }
    }
    const double den = t.denominator();
    if (filter_energy == 0.0 || !(den > 0.0)) {
      t.degenerate = true;
      t.sinr = 0.0;
    } else {
      t.sinr = t.signal / den;
    }
  }
  return out;
}

CMatrix conditional_interference(const CellEstimate& estimate, const InterferenceMatrix& interference,
                                 const SystemConfig& config, int m) {
  CMatrix b = interference.own_error + interference.cross_error;
  b.diagonal().array() += 1.0 / config.rho;
  for (int k = 0; k < estimate.users; ++k) {
    if (k != m) b.noalias() += estimate.estimates.col(k) * estimate.estimates.col(k).adjoint();
    for (int l = 0; l < estimate.cells; ++l) {
      if (l == estimate.cell) continue;
      b.noalias() += estimate.mean(l, k) * estimate.mean(l, k).adjoint();
    }
  }
  return b;
}

DenominatorEstimate nested_denominator_oracle(const CorrelationProfile& profile, const SystemConfig& config,
                                              const CellStatistics& stats, const std::vector<CVector>& pilots,
                                              const LinearFilter& filter, int draws, std::uint64_t seed) {
  if (draws < 2) throw ConfigError("oracle needs at least two draws");
  const int j = stats.cell;
  const int cells = stats.cells;
  const int users = stats.users;
  const int n = profile.antennas();
  const CMatrix& r = filter.vectors;
  const CellEstimate est = model::estimate_cell(profile, stats, pilots);

  std::vector<mmimo::stats::RunningMean> acc(users);
  for (int d = 0; d < draws; ++d) {
    auto engine = rng::substream(seed, rng::Purpose::kConditionalOracle, {static_cast<std::uint64_t>(d)});
    // Conditional draws by residual correction: h = h' + R Q (y - y') with
    // (h', y') an independent unconditional draw.
    std::vector<CMatrix> h(cells, CMatrix(n, users));
    for (int k = 0; k < users; ++k) {
      CVector y_fresh = CVector::Zero(n);
      std::vector<CVector> fresh(cells);
      for (int l = 0; l < cells; ++l) {
        const CMatrix& f = profile.factor(j, l, k);
        fresh[l] = f * rng::circular_gaussian(engine, f.cols());
        y_fresh += fresh[l];
      }
      if (!config.noiseless_training()) {
        y_fresh += rng::circular_gaussian(engine, n) * (1.0 / std::sqrt(config.rho_tau));
      }
      const CVector q = stats.filter(k) * (pilots[k] - y_fresh);
      for (int l = 0; l < cells; ++l) {
        const CMatrix& f = profile.factor(j, l, k);
        h[l].col(k) = fresh[l] + f * (f.adjoint() * q);
      }
    }
    std::vector<CMatrix> gains(cells);
    for (int l = 0; l < cells; ++l) gains[l] = r.adjoint() * h[l];  // (m, k) -> r_m^H h_jlk
    for (int m = 0; m < users; ++m) {
      const CVector error = h[j].col(m) - est.estimates.col(m);
      double value = r.col(m).squaredNorm() / config.rho;
      value += std::norm(r.col(m).dot(error));
      value -= std::norm(gains[j](m, m));
      for (int l = 0; l < cells; ++l) value += gains[l].row(m).squaredNorm();
      acc[m].add(value);
    }
  }
  DenominatorEstimate out;
  out.mean.resize(users);
  out.std_error.resize(users);
  for (int m = 0; m < users; ++m) {
    out.mean(m) = acc[m].mean();
    out.std_error(m) = acc[m].std_error();
  }
  return out;
}

RateSamples simulate_rates(const CorrelationProfile& profile, const SystemConfig& config,
                           const MonteCarloOptions& options) {
  config.validate();
  if (options.trials < 0) throw ConfigError("trials must be nonnegative");
  const int users = profile.users();
  const double lambda = options.lambda > 0.0 ? options.lambda : default_lambda(config);

  RateSamples out;
  out.cells = options.cells;
  if (out.cells.empty()) {
    for (int j = 0; j < profile.cells(); ++j) out.cells.push_back(j);
  }
  for (int j : out.cells) {
    if (j < 0 || j >= profile.cells()) throw ConfigError("evaluated cell out of range");
  }
  out.users = users;
  const Eigen::Index columns = static_cast<Eigen::Index>(out.cells.size()) * users;
  out.mf.resize(options.trials, columns);
  out.mmse.resize(options.trials, columns);

  const int threads = std::max(1, std::min(options.threads, std::max(1, options.trials)));
  for (std::size_t c = 0; c < out.cells.size(); ++c) {
    const int j = out.cells[c];
    const CellStatistics stats = model::estimator_statistics(profile, config, j);
    const InterferenceMatrix interference = interference_matrix(profile, stats);
    const MmseFilterCache mmse_filter_of(interference, lambda);
    const Eigen::Index offset = static_cast<Eigen::Index>(c) * users;

    // Each trial is a pure function of (seed, trial, cell) and owns its row.
    auto worker = [&](int first) {
      for (int t = first; t < options.trials; t += threads) {
        const auto pilots = model::draw_cell_pilots(profile, config, static_cast<std::uint64_t>(t), j);
        const CellEstimate est = model::estimate_cell(profile, stats, pilots);
        const auto mf = conditional_sinr(matched_filter(est), est, interference, config);
        const auto mmse = conditional_sinr(mmse_filter_of(est), est, interference, config);
        for (int m = 0; m < users; ++m) {
          out.mf(t, offset + m) = mf[m].rate();
          out.mmse(t, offset + m) = mmse[m].rate();
        }
      }
    };
    if (threads == 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
      for (auto& th : pool) th.join();
    }
  }
  return out;
}

RateEstimate summarize(const RMatrix& samples) {
  RateEstimate out;
  const Eigen::Index users = samples.cols();
  out.mean.resize(users);
  out.std_error.resize(users);
  for (Eigen::Index u = 0; u < users; ++u) {
    mmimo::stats::RunningMean acc;
    for (Eigen::Index t = 0; t < samples.rows(); ++t) acc.add(samples(t, u));
    out.mean(u) = acc.mean();
    out.std_error(u) = acc.std_error();
  }
  mmimo::stats::RunningMean network;
  for (Eigen::Index t = 0; t < samples.rows(); ++t) network.add(samples.row(t).mean());
  out.network_mean = network.mean();
  out.network_std_error = network.std_error();
  return out;
}

RateEstimate ergodic_rate_mc(const CorrelationProfile& profile, const SystemConfig& config, Detector kind,
                             int trials) {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  MonteCarloOptions options;
  options.trials = trials;
  const RateSamples samples = simulate_rates(profile, config, options);
  return summarize(kind == Detector::kMatchedFilter ? samples.mf : samples.mmse);
}

}  // namespace mmimo::detect
