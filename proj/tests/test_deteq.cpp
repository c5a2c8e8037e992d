#include <doctest.h>

#include <cmath>

#include "mmimo/closedform.hpp"
#include "mmimo/deteq.hpp"
#include "mmimo/detect.hpp"
#include "mmimo/model.hpp"

using namespace mmimo;

namespace {

model::SystemConfig make_config(int cells, int users, int antennas, double rho) {
  model::SystemConfig c;
  c.cells = cells;
  c.users = users;
  c.antennas = antennas;
  c.rho = rho;
  return c;
}

}  // namespace

TEST_CASE("angular model equivalents reproduce the closed forms") {
  for (int p : {100, 40}) {
    const auto config = make_config(4, 10, 100, 1.0);
    const auto profile = model::build_simple_profile(config, model::SimpleModelSpec::random_basis(100, p, 0.3, 9));
    const auto stats = model::estimator_statistics(profile, config, 1);
    const closedform::SimpleSystemPoint pt{100.0, p / 10.0, 0.3, 4, 0.0};

    const auto mf = deteq::de_sinr_mf(profile, stats, config);
    const double cf_mf = closedform::gamma_mf_simple(pt).gamma;
    for (const auto& u : mf.users) CHECK(u.gamma == doctest::Approx(cf_mf).epsilon(1e-10));

    const double lambda = detect::default_lambda(config);
    const auto mmse = deteq::de_sinr_mmse(profile, stats, config, lambda);
    const auto cf = closedform::gamma_mmse_simple(pt);
    for (const auto& u : mmse.users) {
      CHECK(u.gamma == doctest::Approx(cf.gamma).epsilon(1e-9));
      CHECK(u.delta == doctest::Approx(cf.delta).epsilon(1e-9));
    }
  }
}

TEST_CASE("single cell with perfect estimates") {
  const auto config = make_config(1, 5, 50, 2.0);
  const auto profile = model::uniform_profile(config);
  const auto stats = model::estimator_statistics(profile, config, 0);
  const auto mf = deteq::de_sinr_mf(profile, stats, config);
  for (const auto& u : mf.users) {
    CHECK(u.gamma == doctest::Approx(1.0 / (1.0 / 100 + 5.0 / 50)).epsilon(1e-12));
    CHECK(u.contamination == 0.0);
  }
  const auto limit = deteq::asymptotic_sir(stats);
  CHECK(limit.gamma_inf(0) == kInfinity);
}

TEST_CASE("rate mapping") {
  CHECK(deteq::de_rate(0.0) == 0.0);
  CHECK(deteq::de_rate(1.0) == doctest::Approx(1.0));
  CHECK(deteq::de_rate(3.038487508440243) == doctest::Approx(2.0138150769785025).epsilon(1e-12));
  CHECK_THROWS_AS(deteq::de_rate(-1.0), ConfigError);
}

TEST_CASE("asymptotic SIR") {
  SUBCASE("angular model") {
    const auto config = make_config(4, 3, 16, 1.0);
    const auto profile = model::build_simple_profile(config, model::SimpleModelSpec::canonical(16, 8, 0.1));
    const auto stats = model::estimator_statistics(profile, config, 0);
    const auto limit = deteq::asymptotic_sir(stats);
    for (int m = 0; m < 3; ++m) CHECK(limit.gamma_inf(m) == doctest::Approx(100.0 / 3).epsilon(1e-12));

    const auto mf = deteq::de_sinr_mf(profile, stats, config);
    const auto mmse = deteq::de_sinr_mmse(profile, stats, config, detect::default_lambda(config));
    for (int m = 0; m < 3; ++m) {
      CHECK(mf.users[m].gamma < limit.gamma_inf(m));
      CHECK(mmse.users[m].gamma < limit.gamma_inf(m));
      CHECK(mmse.users[m].gamma >= mf.users[m].gamma);
    }
  }
  SUBCASE("full interference with two cells") {
    const auto config = make_config(2, 2, 8, 1.0);
    const auto profile = model::uniform_profile(config, 1.0);
    const auto limit = deteq::asymptotic_sir(model::estimator_statistics(profile, config, 0));
    CHECK(limit.gamma_inf(0) == doctest::Approx(1.0));
  }
}

TEST_CASE("general profile equivalents are finite and ordered") {
  model::SystemConfig config = make_config(2, 3, 24, 1.0);
  config.rho_tau = 5.0;
  const auto profile = model::build_simple_profile(config, model::SimpleModelSpec::random_basis(24, 12, 0.5, 4));
  const auto stats = model::estimator_statistics(profile, config, 0);
  const auto mf = deteq::de_sinr_mf(profile, stats, config);
  const auto mmse = deteq::de_sinr_mmse(profile, stats, config, detect::default_lambda(config));
  for (int m = 0; m < 3; ++m) {
    CHECK(std::isfinite(mf.users[m].gamma));
    CHECK(mf.users[m].gamma > 0);
    CHECK(mmse.users[m].gamma >= mf.users[m].gamma * (1 - 1e-9));
    CHECK(mmse.users[m].noise >= 0);
    CHECK(mmse.users[m].interference >= 0);
  }
}
