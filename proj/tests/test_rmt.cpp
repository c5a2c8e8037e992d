#include <doctest.h>

#include <cmath>

#include "mmimo/linalg.hpp"
#include "mmimo/rmt.hpp"
#include "mmimo/rng.hpp"

using namespace mmimo;
using namespace mmimo::rmt;

namespace {

CMatrix random_psd(rng::Engine& engine, int n, int rank, double scale = 1.0) {
  const CMatrix g = rng::circular_gaussian(engine, n, rank);
  return (g * g.adjoint()) * (scale / n);
}

FixedPointProblem random_problem(std::uint64_t tag, int n, int k, double rho) {
  auto engine = rng::substream(77, rng::Purpose::kTestInstance, {tag});
  FixedPointProblem p;
  p.D = random_psd(engine, n, n);
  p.S = random_psd(engine, n, n / 2, 0.5);
  p.rho = rho;
  for (int i = 0; i < k; ++i) p.R.push_back(random_psd(engine, n, 1 + i % n, 2.0));
  return p;
}

}  // namespace

TEST_CASE("empty user set gives the plain resolvent") {
  FixedPointProblem p;
  p.D = CMatrix::Identity(5, 5);
  p.S = CMatrix::Zero(5, 5);
  p.rho = 2.0;
  const auto sol = solve_fixed_point(p);
  CHECK((sol.T - 0.5 * CMatrix::Identity(5, 5)).norm() < 1e-14);
  CHECK(trace_functional(p.D, sol.T) == doctest::Approx(0.5));

  const CMatrix theta = CMatrix::Identity(5, 5) * 3.0;
  const auto d = solve_derivative(p, sol, theta);
  CHECK((d.T_prime - sol.T * theta * sol.T).norm() < 1e-14);
}

TEST_CASE("identity covariances at load one give the golden ratio") {
  const int n = 10;
  FixedPointProblem p;
  p.D = CMatrix::Identity(n, n);
  p.S = CMatrix::Zero(n, n);
  p.rho = 1.0;
  p.R.assign(n, CMatrix::Identity(n, n));
  const auto sol = solve_fixed_point(p);
  for (int k = 0; k < n; ++k) CHECK(std::abs(sol.delta(k) - 0.6180339887498948) < 1e-10);
}

TEST_CASE("fixed point satisfies its defining equations") {
  const auto p = random_problem(1, 20, 7, 0.4);
  const auto sol = solve_fixed_point(p);
  const CMatrix rebuilt = resolvent_equivalent(p, sol.delta);
  CHECK((rebuilt - sol.T).norm() / sol.T.norm() < 1e-10);
  for (int k = 0; k < p.size(); ++k) {
    CHECK(sol.delta(k) >= 0.0);
    CHECK(std::abs(sol.delta(k) - linalg::trace_product(p.R[k], sol.T).real() / 20.0) <= 1e-12 * (1 + sol.delta(k)));
  }
  CHECK(sol.residual <= 1e-12 * (1.0 + sol.delta.cwiseAbs().maxCoeff()));
}

TEST_CASE("damped and undamped iterations meet") {
  const auto p = random_problem(2, 16, 6, 0.2);
  FixedPointOptions half;
  half.damping = 0.5;
  const auto a = solve_fixed_point(p);
  const auto b = solve_fixed_point(p, half);
  CHECK((a.delta - b.delta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("delta decreases in rho") {
  const auto base = random_problem(3, 16, 5, 0.1);
  RVector previous;
  for (double rho : {0.1, 0.3, 1.0, 3.0, 10.0}) {
    auto p = base;
    p.rho = rho;
    const RVector delta = solve_fixed_point(p).delta;
    if (previous.size()) CHECK((delta.array() < previous.array()).all());
    previous = delta;
  }
}

TEST_CASE("iteration budget and bad inputs are reported") {
  auto p = random_problem(4, 12, 4, 0.05);
  FixedPointOptions tight;
  tight.max_iterations = 1;
  tight.damping_fallback = false;
  CHECK_THROWS_AS(solve_fixed_point(p, tight), NonConvergenceError);
  p.rho = 0.0;
  CHECK_THROWS_AS(solve_fixed_point(p), ConfigError);
  p.rho = 1.0;
  p.R.push_back(CMatrix::Identity(3, 3));
  CHECK_THROWS_AS(solve_fixed_point(p), ConfigError);
}

TEST_CASE("derivative solves its linear system") {
  const auto p = random_problem(5, 18, 6, 0.3);
  const auto sol = solve_fixed_point(p);
  auto engine = rng::substream(77, rng::Purpose::kTestInstance, {55});
  const CMatrix theta = random_psd(engine, 18, 18);
  const auto d = solve_derivative(p, sol, theta);
  const RMatrix id = RMatrix::Identity(p.size(), p.size());
  CHECK(((id - d.J) * d.delta_prime - d.v).norm() <= 1e-10 * d.v.norm());

  CMatrix inner = theta;
  for (int k = 0; k < p.size(); ++k) inner += p.R[k] * (d.delta_prime(k) / (18.0 * std::pow(1 + sol.delta(k), 2)));
  CHECK((d.T_prime - sol.T * inner * sol.T).norm() <= 1e-10 * d.T_prime.norm());
}

TEST_CASE("identity-Theta derivative is minus dT/drho") {
  for (int instance = 0; instance < 3; ++instance) {
    const auto p = random_problem(10 + instance, 14, 5, 0.5);
    for (double rho : {0.2, 0.7, 2.0}) {
      auto q = p;
      q.rho = rho;
      const auto sol = solve_fixed_point(q);
      const double analytic = trace_functional(q.D, solve_derivative(q, sol, CMatrix::Identity(14, 14)).T_prime);
      const double h = 1e-4 * rho;
      auto f = [&](double x) {
        auto r = q;
        r.rho = x;
        return trace_functional(r.D, solve_fixed_point(r).T);
      };
      const double numeric = -(f(rho + h) - f(rho - h)) / (2 * h);
      CHECK(std::abs(analytic - numeric) <= 1e-5 * std::abs(numeric));
    }
  }
}

TEST_CASE("resolvent oracle") {
  SUBCASE("zero covariances make it deterministic") {
    FixedPointProblem p;
    auto engine = rng::substream(77, rng::Purpose::kTestInstance, {90});
    p.D = random_psd(engine, 6, 6);
    p.S = random_psd(engine, 6, 3);
    p.rho = 0.7;
    p.R.assign(3, CMatrix::Zero(6, 6));
    const auto est = resolvent_trace_oracle(p, std::nullopt, 10, 1);
    CMatrix base = p.S;
    base.diagonal().array() += p.rho;
    CHECK(est.mean == doctest::Approx(trace_functional(p.D, base.inverse())).epsilon(1e-12));
    CHECK(est.std_error == 0.0);
  }
  SUBCASE("agrees with the deterministic equivalents") {
    const auto p = random_problem(20, 64, 16, 0.5);
    const auto sol = solve_fixed_point(p);
    const auto lin = resolvent_trace_oracle(p, std::nullopt, 200, 5);
    CHECK(std::abs(trace_functional(p.D, sol.T) - lin.mean) < 3 * lin.std_error);
    const CMatrix theta = CMatrix::Identity(64, 64);
    const auto quad = resolvent_trace_oracle(p, theta, 200, 6);
    const double de = trace_functional(p.D, solve_derivative(p, sol, theta).T_prime);
    CHECK(std::abs(de - quad.mean) < 3 * quad.std_error);
  }
  SUBCASE("standard error follows the square-root law") {
    const auto p = random_problem(21, 16, 6, 0.5);
    const double a = resolvent_trace_oracle(p, std::nullopt, 2000, 7).std_error;
    const double b = resolvent_trace_oracle(p, std::nullopt, 4000, 8).std_error;
    CHECK(b / a == doctest::Approx(1 / std::sqrt(2.0)).epsilon(0.2));
  }
  SUBCASE("needs two draws") {
    CHECK_THROWS_AS(resolvent_trace_oracle(random_problem(22, 4, 2, 1.0), std::nullopt, 1, 1), ConfigError);
  }
}
