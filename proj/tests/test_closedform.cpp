#include <doctest.h>

#include <cmath>

#include "mmimo/closedform.hpp"

using namespace mmimo;
using namespace mmimo::closedform;

// Expected values come from tests/oracles/closed_form_oracle.py (40 digits).

namespace {

SimpleSystemPoint point(double snr, double dof, double alpha, int cells, double lambda = 0.0) {
  return {snr, dof, alpha, cells, lambda};
}

}  // namespace

TEST_CASE("matched filter closed form") {
  const auto a = gamma_mf_simple(point(100, 90, 0.3, 4));
  CHECK(a.gamma == doctest::Approx(3.038487508440243).epsilon(1e-12));
  CHECK(rate_mf_simple(point(100, 90, 0.3, 4)) == doctest::Approx(2.0138150769785025).epsilon(1e-12));
  CHECK(1.0 / a.gamma == doctest::Approx(a.noise + a.multiuser + a.contamination).epsilon(1e-14));
  CHECK(rate_mf_simple(point(100, 90, 0.1, 4)) == doctest::Approx(4.103250065732825).epsilon(1e-12));
}

TEST_CASE("MMSE closed form") {
  const auto m = gamma_mmse_simple(point(100, 60, 0.3, 4, 0.01));
  CHECK(m.gamma == doctest::Approx(3.040030702860152).epsilon(1e-10));
  CHECK(m.delta == doctest::Approx(15.749254440008368).epsilon(1e-10));
  CHECK(m.Z == doctest::Approx(1.0634950691671896).epsilon(1e-10));
  CHECK(m.X == doctest::Approx(1.0149563336985897).epsilon(1e-10));
  CHECK(m.Y == doctest::Approx(0.6591669119542986).epsilon(1e-10));

  const auto d = gamma_mmse_simple(point(100, 90, 0.1, 4));
  CHECK(d.gamma == doctest::Approx(19.779542185966764).epsilon(1e-10));
}

TEST_CASE("ultimate limit") {
  CHECK(gamma_rate_infinity(0.3, 4).rate_inf == doctest::Approx(2.2337971846086973).epsilon(1e-13));
  CHECK(gamma_rate_infinity(0.1, 4).gamma_inf == doctest::Approx(100.0 / 3).epsilon(1e-13));
  CHECK(gamma_rate_infinity(0.1, 4).rate_inf == doctest::Approx(5.101538026462062).epsilon(1e-13));
  CHECK(gamma_rate_infinity(0.3, 1).unbounded());
  CHECK(gamma_rate_infinity(0.0, 4).unbounded());
}

TEST_CASE("both detectors stay below the limit and approach it") {
  for (double alpha : {0.1, 0.3, 1.0}) {
    const double limit = gamma_rate_infinity(alpha, 4).gamma_inf;
    double prev_mf = 0, prev_mmse = 0;
    for (double scale : {1.0, 10.0, 100.0, 1e4, 1e7}) {
      const auto p = point(scale, scale, alpha, 4);
      const double mf = gamma_mf_simple(p).gamma;
      const double mmse = gamma_mmse_simple(p).gamma;
      CHECK(mf < limit);
      CHECK(mmse < limit);
      CHECK(mmse >= mf * (1 - 1e-12));
      CHECK(mf > prev_mf);
      CHECK(mmse > prev_mmse);
      prev_mf = mf;
      prev_mmse = mmse;
    }
    CHECK(prev_mf / limit > 0.99);
    CHECK(prev_mmse / limit > 0.99);
  }
}

TEST_CASE("invalid points") {
  CHECK_THROWS_AS(gamma_mf_simple(point(0, 1, 0.3, 4)), ConfigError);
  CHECK_THROWS_AS(gamma_mf_simple(point(1, 0, 0.3, 4)), ConfigError);
  CHECK_THROWS_AS(gamma_mf_simple(point(1, 1, 1.5, 4)), ConfigError);
  CHECK_THROWS_AS(gamma_mf_simple(point(1, 1, 0.3, 0)), ConfigError);
}

TEST_CASE("matched filter DoF requirement") {
  CHECK(dof_required_mf(0.9, 100, 0.3, 4).dof_per_user == doctest::Approx(87.74214975405174).epsilon(1e-11));
  CHECK(dof_required_mf(0.5, 100, 0.3, 4).dof_per_user == doctest::Approx(6.371600507827259).epsilon(1e-11));
  CHECK(dof_required_mf(0.9, 100, 0.1, 4).dof_per_user == doctest::Approx(6105.407837799748).epsilon(1e-10));
  CHECK(dof_required_mf(0.5, 100, 0.1, 4).dof_per_user == doctest::Approx(10.381858369336285).epsilon(1e-11));

  SUBCASE("round trip hits the target") {
    for (double eta : {0.3, 0.5, 0.7, 0.9}) {
      const auto req = dof_required_mf(eta, 100, 0.3, 4);
      REQUIRE(req.feasible());
      const double r = rate_mf_simple(point(100, req.dof_per_user, 0.3, 4));
      CHECK(std::abs(r - eta * req.rate_inf) <= 1e-9 * req.rate_inf);
      CHECK(req.target_rate == doctest::Approx(eta * req.rate_inf));
    }
  }
  SUBCASE("too little SNR is infeasible") {
    const auto req = dof_required_mf(0.9, 1, 0.3, 4);
    CHECK(req.status == DofStatus::kInfeasible);
    CHECK(std::isnan(req.dof_per_user));
  }
  SUBCASE("no contamination") {
    const auto req = dof_required_mf(0.5, 100, 0.3, 1);
    CHECK(req.status == DofStatus::kNoContamination);
    CHECK(to_string(req.status) == "no_contamination");
  }
  SUBCASE("eta outside (0, 1)") {
    CHECK_THROWS_AS(dof_required_mf(0.0, 100, 0.3, 4), ConfigError);
    CHECK_THROWS_AS(dof_required_mf(1.0, 100, 0.3, 4), ConfigError);
    CHECK_THROWS_AS(dof_required_mmse(1.2, 100, 0.3, 4), ConfigError);
  }
}

TEST_CASE("MMSE DoF requirement") {
  CHECK(dof_required_mmse(0.5, 100, 0.3, 4, 0.01).dof_per_user == doctest::Approx(4.85510666406476).epsilon(2e-6));
  CHECK(dof_required_mmse(0.5, 100, 0.1, 4, 0.01).dof_per_user == doctest::Approx(4.977443242003882).epsilon(2e-6));
  CHECK(dof_required_mmse(0.9, 100, 0.3, 4, 0.01).dof_per_user == doctest::Approx(58.27805314772808).epsilon(2e-6));
  const double target = rate_mf_simple(point(100, 90, 0.1, 4));
  CHECK(dof_required_mmse_for_rate(target, 100, 0.1, 4, 0.01).dof_per_user ==
        doctest::Approx(36.78974272166342).epsilon(2e-6));

  SUBCASE("result is the upper end of the bracket") {
    const auto req = dof_required_mmse(0.7, 100, 0.3, 4);
    REQUIRE(req.feasible());
    CHECK(rate_mmse_simple(point(100, req.dof_per_user, 0.3, 4)) >= req.target_rate);
    CHECK(rate_mmse_simple(point(100, req.dof_per_user * (1 - 1e-5), 0.3, 4)) < req.target_rate);
  }
  SUBCASE("cap makes the search infeasible") {
    BisectionOptions small;
    small.cap = 10;
    CHECK(dof_required_mmse(0.9, 100, 0.3, 4, 0.0, small).status == DofStatus::kInfeasible);
  }
  SUBCASE("no contamination") {
    CHECK(dof_required_mmse(0.5, 100, 0.0, 4).status == DofStatus::kNoContamination);
  }
}

TEST_CASE("MMSE needs fewer DoF and the gap widens with eta") {
  for (double alpha : {0.1, 0.3}) {
    double prev_ratio = 0.0;
    for (double eta : {0.5, 0.6, 0.7, 0.8, 0.9}) {
      const auto mf = dof_required_mf(eta, 100, alpha, 4);
      const auto mmse = dof_required_mmse(eta, 100, alpha, 4);
      REQUIRE(mf.feasible());
      REQUIRE(mmse.feasible());
      CHECK(mmse.dof_per_user <= mf.dof_per_user);
      const double ratio = mf.dof_per_user / mmse.dof_per_user;
      CHECK(ratio > prev_ratio);
      prev_ratio = ratio;
    }
  }
}

TEST_CASE("DoF requirement falls with SNR") {
  double prev_mf = kInfinity, prev_mmse = kInfinity;
  for (double snr_db = 0; snr_db <= 40; snr_db += 5) {
    const double snr = std::pow(10.0, snr_db / 10);
    const auto mf = dof_required_mf(0.5, snr, 0.3, 4);
    const auto mmse = dof_required_mmse(0.5, snr, 0.3, 4);
    if (mf.feasible()) {
      CHECK(mf.dof_per_user < prev_mf);
      prev_mf = mf.dof_per_user;
    }
    if (mmse.feasible()) {
      CHECK(mmse.dof_per_user < prev_mmse * (1 + 1e-5));
      prev_mmse = mmse.dof_per_user;
    }
  }
  CHECK(prev_mf < kInfinity);
}
