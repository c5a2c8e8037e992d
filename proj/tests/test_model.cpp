#include <doctest.h>

#include <cmath>

#include "mmimo/linalg.hpp"
#include "mmimo/model.hpp"
#include "mmimo/rng.hpp"
#include "mmimo/stats.hpp"

using namespace mmimo;
using namespace mmimo::model;

namespace {

SystemConfig make_config(int cells, int users, int antennas, double rho_tau = kInfinity, std::uint64_t seed = 3) {
  SystemConfig c;
  c.cells = cells;
  c.users = users;
  c.antennas = antennas;
  c.rho = 1.0;
  c.rho_tau = rho_tau;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("system config rejects out-of-range fields") {
  CHECK_NOTHROW(make_config(1, 1, 1).validate());
  CHECK_THROWS_AS(make_config(0, 1, 1).validate(), ConfigError);
  CHECK_THROWS_AS(make_config(1, 0, 1).validate(), ConfigError);
  CHECK_THROWS_AS(make_config(1, 1, 0).validate(), ConfigError);
  auto c = make_config(1, 1, 1);
  c.rho = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = make_config(1, 1, 1, -1.0);
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("identity correlations pass every check") {
  const auto config = make_config(2, 3, 5);
  const auto profile = uniform_profile(config);
  const auto report = validate_profile(profile, config);
  CHECK(report.ok());
  REQUIRE(report.entries.size() == 2 * 2 * 3);
  for (const auto& e : report.entries) {
    CHECK(e.spectral_norm == doctest::Approx(1.0));
    CHECK(e.normalized_trace == doctest::Approx(1.0));
  }
}

TEST_CASE("rank-deficient angular profile passes with unit own-cell trace") {
  const auto config = make_config(2, 2, 9);
  const auto profile = build_simple_profile(config, SimpleModelSpec::random_basis(9, 3, 0.4, 11));
  const auto report = validate_profile(profile, config);
  CHECK(report.ok());
  for (const auto& e : report.entries) {
    CHECK(e.normalized_trace == doctest::Approx(e.j == e.l ? 1.0 : 0.4));
  }
}

TEST_CASE("injected negative eigenvalue is reported by index") {
  const int n = 4;
  auto covariance = [&](int j, int l, int k) {
    CMatrix r = CMatrix::Identity(n, n);
    if (j == 1 && l == 0 && k == 1) r(2, 2) = -0.1;
    return r;
  };
  const auto report = validate_covariances(2, 2, n, covariance);
  REQUIRE_FALSE(report.ok());
  REQUIRE(report.violations.size() == 1);
  CHECK(report.violations[0].find("R[1,0,1]") != std::string::npos);
}

TEST_CASE("profile shape mismatch is a configuration error") {
  const auto profile = uniform_profile(make_config(2, 2, 4));
  CHECK_THROWS_AS(validate_profile(profile, make_config(2, 3, 4)), ConfigError);
}

TEST_CASE("angular model with identity basis") {
  const auto config = make_config(2, 1, 4);
  const auto profile = build_simple_profile(config, SimpleModelSpec::canonical(4, 4, 0.1));
  CHECK((profile.covariance(0, 0, 0) - CMatrix::Identity(4, 4)).norm() < 1e-14);
  CHECK((profile.covariance(0, 1, 0) - 0.1 * CMatrix::Identity(4, 4)).norm() < 1e-14);
  REQUIRE(profile.simple_model().has_value());
  CHECK(profile.simple_model()->dof == 4);
}

TEST_CASE("angular model N=6, P=2 has rank 2 and trace 6") {
  const auto config = make_config(2, 2, 6);
  const auto profile = build_simple_profile(config, SimpleModelSpec::random_basis(6, 2, 1.0, 5));
  for (int j = 0; j < 2; ++j)
    for (int l = 0; l < 2; ++l)
      for (int k = 0; k < 2; ++k) {
        const CMatrix r = profile.covariance(j, l, k);
        CHECK(linalg::psd_rank(r) == 2);
        CHECK(r.trace().real() == doctest::Approx(6.0));
      }
  // alpha = 1 makes own-cell and other-cell links identical
  CHECK((profile.covariance(0, 0, 0) - profile.covariance(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("random basis is orthonormal and bad specs are rejected") {
  const auto spec = SimpleModelSpec::random_basis(12, 5, 0.3, 9);
  CHECK((spec.basis.adjoint() * spec.basis - CMatrix::Identity(5, 5)).norm() < 1e-10);
  const auto config = make_config(2, 2, 4);
  CHECK_THROWS_AS(build_simple_profile(config, SimpleModelSpec::canonical(4, 5, 0.3)), ConfigError);
  CHECK_THROWS_AS(build_simple_profile(config, SimpleModelSpec::canonical(4, 2, 0.0)), ConfigError);
  CHECK_THROWS_AS(build_simple_profile(config, SimpleModelSpec::canonical(4, 2, 1.5)), ConfigError);
  CHECK(SimpleModelSpec::dof_from_ratio(100, 1.0 / 3.0) == 33);
  CHECK(SimpleModelSpec::dof_from_ratio(10, 0.0) == 1);
}

TEST_CASE("channel draws are reproducible and follow the factors") {
  const auto config = make_config(2, 3, 6);
  const auto profile = build_simple_profile(config, SimpleModelSpec::random_basis(6, 4, 0.5, 1));
  const auto a = draw_channels(profile, 42, 7);
  const auto b = draw_channels(profile, 42, 7);
  const auto c = draw_channels(profile, 42, 8);
  for (int j = 0; j < 2; ++j)
    for (int l = 0; l < 2; ++l) {
      CHECK(a.channel(j, l) == b.channel(j, l));
      CHECK(a.channel(j, l) != c.channel(j, l));
      for (int k = 0; k < 3; ++k) {
        const CVector expected = profile.factor(j, l, k) * a.fast_fading(j, l, k);
        CHECK(a.channel(j, l).col(k) == expected);
      }
    }
}

TEST_CASE("zero factor gives a zero channel") {
  std::vector<CMatrix> factors(1, CMatrix::Zero(3, 2));
  const CorrelationProfile profile(1, 1, 3, factors);
  CHECK(draw_channels(profile, 1, 0).channel(0, 0).norm() == 0.0);
}

TEST_CASE("empirical channel covariance matches R") {
  const auto config = make_config(1, 1, 3);
  auto engine = rng::substream(17, rng::Purpose::kTestInstance, {1});
  std::vector<CMatrix> factors = {rng::circular_gaussian(engine, 3, 3) * 0.7};
  const CorrelationProfile profile(1, 1, 3, factors);
  const CMatrix r = profile.covariance(0, 0, 0);
  CMatrix acc = CMatrix::Zero(3, 3);
  const int draws = 100000;
  for (int d = 0; d < draws; ++d) {
    const CVector h = draw_channels(profile, 5, d).channel(0, 0).col(0);
    acc += h * h.adjoint();
  }
  acc /= draws;
  CHECK((acc - r).norm() / r.norm() < 2e-2);
}

TEST_CASE("pilot observation sums the links and adds training noise") {
  SUBCASE("single cell without noise observes the channel") {
    const auto config = make_config(1, 2, 4);
    const auto profile = uniform_profile(config);
    const auto draw = draw_channels(profile, config.seed, 0);
    const auto obs = draw_pilot_observation(profile, draw, config);
    CHECK(obs.at(0, 1) == draw.channel(0, 0).col(1));
  }
  SUBCASE("expected energy is tr R_jj + tr R_jl + N / rho_tau") {
    const auto config = make_config(2, 1, 4, 2.0);
    const auto profile = uniform_profile(config, 0.5);
    stats::RunningMean energy;
    for (int d = 0; d < 20000; ++d) {
      const auto draw = draw_channels(profile, config.seed, d);
      energy.add(draw_pilot_observation(profile, draw, config).at(0, 0).squaredNorm());
    }
    const double expected = 4.0 + 2.0 + 4.0 / 2.0;
    CHECK(std::abs(energy.mean() - expected) < 3.0 * energy.std_error());
  }
  SUBCASE("single-cell path matches the full draw bit for bit") {
    const auto config = make_config(3, 2, 5, 4.0);
    const auto profile = build_simple_profile(config, SimpleModelSpec::random_basis(5, 3, 0.2, 8));
    const auto obs = draw_pilot_observation(profile, draw_channels(profile, config.seed, 12), config);
    const auto cell = draw_cell_pilots(profile, config, 12, 2);
    for (int k = 0; k < 2; ++k) CHECK(cell[k] == obs.at(2, k));
  }
}

TEST_CASE("MMSE estimation in the textbook cases") {
  SUBCASE("perfect estimation") {
    const auto config = make_config(1, 1, 3);
    const auto profile = uniform_profile(config);
    const auto draw = draw_channels(profile, 1, 0);
    const auto est = mmse_estimate(profile, draw_pilot_observation(profile, draw, config), config);
    CHECK((est.filter(0, 0) - CMatrix::Identity(3, 3)).norm() < 1e-12);
    CHECK((est.cross(0, 0, 0) - CMatrix::Identity(3, 3)).norm() < 1e-12);
    CHECK((est.estimate(0, 0) - draw.channel(0, 0).col(0)).norm() < 1e-12);
    CHECK(conditional_covariance(profile, est.statistics[0], 0, 0).norm() < 1e-12);
  }
  SUBCASE("unit training SNR halves everything") {
    const auto config = make_config(1, 1, 3, 1.0);
    const auto stats = estimator_statistics(uniform_profile(config), config, 0);
    CHECK((stats.filter(0) - 0.5 * CMatrix::Identity(3, 3)).norm() < 1e-12);
    CHECK((stats.cross(0, 0) - 0.5 * CMatrix::Identity(3, 3)).norm() < 1e-12);
  }
  SUBCASE("angular model: normalized trace of Phi_jjm is 1 / Lbar") {
    const auto config = make_config(4, 2, 12);
    const auto profile = build_simple_profile(config, SimpleModelSpec::random_basis(12, 4, 0.1, 2));
    const auto stats = estimator_statistics(profile, config, 1);
    CHECK(stats.cross(1, 0).trace().real() / 12.0 == doctest::Approx(1.0 / 1.3).epsilon(1e-10));
    CHECK(stats.cross(0, 0).trace().real() / 12.0 == doctest::Approx(0.1 / 1.3).epsilon(1e-10));
    CHECK_THROWS_AS(estimator_statistics(profile, config, 1, SingularPolicy::kStrict), SingularityError);
  }
  SUBCASE("noisy training with a tiny SNR drives the estimate to zero") {
    const auto config = make_config(2, 1, 4, 1e-9);
    const auto profile = uniform_profile(config, 0.5);
    const auto est = mmse_estimate(profile, draw_pilot_observation(profile, draw_channels(profile, 1, 0), config), config);
    CHECK(est.estimate(0, 0).norm() < 1e-3);
  }
}

TEST_CASE("estimator invariants on a random correlated profile") {
  const auto config = make_config(2, 2, 5, 3.0);
  auto engine = rng::substream(23, rng::Purpose::kTestInstance, {2});
  std::vector<CMatrix> factors;
  for (int i = 0; i < 8; ++i) factors.push_back(rng::circular_gaussian(engine, 5, 3) * 0.5);
  const CorrelationProfile profile(2, 2, 5, factors);
  const auto stats = estimator_statistics(profile, config, 0);

  for (int k = 0; k < 2; ++k) {
    CHECK(linalg::hermitian_deviation(stats.filter(k)) < 1e-12);
    CHECK(linalg::min_eigenvalue(stats.filter(k)) > 0.0);
    CHECK(linalg::hermitian_deviation(stats.cross(0, k)) < 1e-12);
    CHECK(linalg::min_eigenvalue(stats.cross(0, k)) > -1e-10);
    CHECK(linalg::min_eigenvalue(conditional_covariance(profile, stats, 0, k)) > -1e-10);
  }

  // Error covariance, estimate/error orthogonality and E|hhat|^2 = tr Phi.
  const int draws = 10000;
  CMatrix err = CMatrix::Zero(5, 5), cross = CMatrix::Zero(5, 5);
  stats::RunningMean energy;
  for (int d = 0; d < draws; ++d) {
    const auto draw = draw_channels(profile, 9, d);
    const auto pilots = draw_cell_pilots(profile, SystemConfig{2, 2, 5, 1.0, 3.0, 9}, d, 0);
    const auto est = estimate_cell(profile, stats, pilots);
    const CVector hhat = est.estimates.col(0);
    const CVector e = draw.channel(0, 0).col(0) - hhat;
    CHECK((hhat - profile.covariance(0, 0, 0) * stats.filter(0) * pilots[0]).norm() < 1e-10 * (1.0 + hhat.norm()));
    err += e * e.adjoint();
    cross += hhat * e.adjoint();
    energy.add(hhat.squaredNorm());
  }
  err /= draws;
  cross /= draws;
  const CMatrix c = conditional_covariance(profile, stats, 0, 0);
  CHECK((err - c).norm() / c.norm() < 5e-2);
  CHECK(cross.norm() / c.norm() < 5e-2);
  CHECK(std::abs(energy.mean() - stats.cross(0, 0).trace().real()) < 3.0 * energy.std_error());
}

TEST_CASE("channel energy of the angular model grows like K N") {
  const auto config = make_config(2, 3, 8);
  const auto profile = build_simple_profile(config, SimpleModelSpec::random_basis(8, 2, 0.3, 4));
  stats::RunningMean energy;
  for (int d = 0; d < 4000; ++d) energy.add(draw_channels(profile, 2, d).channel(0, 0).squaredNorm());
  CHECK(std::abs(energy.mean() - 3.0 * 8.0) < 3.0 * energy.std_error());
}
