#include "mmimo/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "mmimo/closedform.hpp"
#include "mmimo/common.hpp"
#include "mmimo/detect.hpp"
#include "mmimo/deteq.hpp"
#include "mmimo/experiment.hpp"
#include "mmimo/model.hpp"
#include "mmimo/rmt.hpp"
#include "mmimo/rng.hpp"

namespace mmimo::validation {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Measurement within(std::string label, double value, double lo, double hi) {
  return {std::move(label), value, lo, hi, value >= lo && value <= hi};
}

Measurement near(std::string label, double value, double target, double tol) {
  return within(std::move(label), value, target - tol, target + tol);
}

Measurement at_most(std::string label, double value, double bound) {
  return within(std::move(label), value, 0.0, bound);
}

std::string fmt(double value) { return expcli::format_number(value); }

struct Context {
  const SuiteOptions& options;
  std::map<std::string, double> tol;
  std::optional<std::vector<expcli::RateResult>> sweep;

  double t(const std::string& key) const { return tol.at(key); }

  const std::vector<expcli::RateResult>& antenna_sweep() {
    if (!sweep) {
      expcli::ExperimentConfig config = expcli::default_config(expcli::Experiment::kRateVsN);
      config.trials = options.trials;
      config.seed = options.seed;
      config.threads = options.threads;
      sweep.emplace();
      for (const auto& point : expcli::rate_points(config)) {
        sweep->push_back(expcli::evaluate_rate_point(config, point, options.threads, true));
      }
    }
    return *sweep;
  }
};

// Random Hermitian PSD test matrices with spectral norm of order one.
CMatrix random_psd(rng::Engine& engine, int n, int rank, double scale = 1.0) {
  const CMatrix g = rng::circular_gaussian(engine, n, rank);
  return (g * g.adjoint()) * (scale / n);
}

rmt::FixedPointProblem random_problem(std::uint64_t seed, std::uint64_t tag, int n, int k, double rho) {
  auto engine = rng::substream(seed, rng::Purpose::kTestInstance, {tag});
  std::uniform_int_distribution<int> rank(std::max(1, n / 4), n);
  rmt::FixedPointProblem p;
  p.D = random_psd(engine, n, n);
  p.S = random_psd(engine, n, n / 2, 0.5);
  p.rho = rho;
  for (int i = 0; i < k; ++i) p.R.push_back(random_psd(engine, n, rank(engine), 2.0));
  return p;
}

// ---------------------------------------------------------------------------

void check_r_inf(Context& ctx, CheckResult& r) {
  const double tol = ctx.t("r_inf.abs");
  r.measurements.push_back(near("R_inf(alpha=0.3, L=4)", closedform::gamma_rate_infinity(0.3, 4).rate_inf, 2.234, tol));
  r.measurements.push_back(near("R_inf(alpha=0.1, L=4)", closedform::gamma_rate_infinity(0.1, 4).rate_inf, 5.101, tol));
}

void check_dof_anchor(Context& ctx, CheckResult& r) {
  const auto mf = closedform::dof_required_mf(0.9, 100.0, 0.3, 4);
  const auto mmse = closedform::dof_required_mmse(0.9, 100.0, 0.3, 4, 0.01);
  r.measurements.push_back(near("MF P/K at eta=0.9, rhoN=100, alpha=0.3", mf.dof_per_user, 87.9, ctx.t("dof_anchor.mf_abs")));
  r.measurements.push_back(within("MMSE P/K at eta=0.9, rhoN=100, alpha=0.3, lambda=0.01", mmse.dof_per_user,
                                  ctx.t("dof_anchor.mmse_lo"), ctx.t("dof_anchor.mmse_hi")));
}

void check_rate_anchor(Context& ctx, CheckResult& r) {
  const closedform::SimpleSystemPoint point{100.0, 90.0, 0.1, 4, 0.0};
  const double rate = closedform::rate_mf_simple(point);
  const double r_inf = closedform::gamma_rate_infinity(0.1, 4).rate_inf;
  const auto mmse = closedform::dof_required_mmse_for_rate(rate, 100.0, 0.1, 4, 0.01);
  r.measurements.push_back(near("MF rate at rhoN=100, P/K=90, alpha=0.1", rate, 4.10, ctx.t("rate_anchor.rate_abs")));
  r.measurements.push_back(near("MF rate / R_inf", rate / r_inf, 0.80, ctx.t("rate_anchor.fraction_abs")));
  r.measurements.push_back(within("MMSE P/K for the same rate", mmse.dof_per_user, ctx.t("rate_anchor.mmse_lo"),
                                  ctx.t("rate_anchor.mmse_hi")));
}

void check_antenna_sweep(Context& ctx, CheckResult& r) {
  const auto& sweep = ctx.antenna_sweep();
  double gap_large[2] = {0.0, 0.0};
  double gap_small[2] = {0.0, 0.0};
  int overlap = 0, total = 0, errors = 0;
  std::string worst;
  double worst_sigma = 0.0;
  for (const auto& row : sweep) {
    if (row.status != "ok") {
      ++errors;
      r.note += "N=" + std::to_string(row.point.antennas) + " " + row.status + "; ";
      continue;
    }
    const double mc[2] = {row.mc_mf, row.mc_mmse};
    const double se[2] = {row.se_mf, row.se_mmse};
    const double de[2] = {row.de_mf, row.de_mmse};
    for (int d = 0; d < 2; ++d) {
      const double gap = std::abs(mc[d] - de[d]) / de[d];
      gap_small[d] = std::max(gap_small[d], gap);
      if (row.point.antennas >= 60) gap_large[d] = std::max(gap_large[d], gap);
      const double sigma = std::abs(mc[d] - de[d]) / se[d];
      if (sigma <= ctx.t("antenna_sweep.overlap_se")) ++overlap;
      if (sigma > worst_sigma) {
        worst_sigma = sigma;
        worst = std::string(d == 0 ? "mf" : "mmse") + " N=" + std::to_string(row.point.antennas) +
                " P=" + row.point.rule.label();
      }
      ++total;
    }
  }
  const double rel_large = ctx.t("antenna_sweep.rel_large");
  const double rel_small = ctx.t("antenna_sweep.rel_small");
  r.measurements.push_back(at_most("max |MC-DE|/DE, MF, N>=60", gap_large[0], rel_large));
  r.measurements.push_back(at_most("max |MC-DE|/DE, MMSE, N>=60", gap_large[1], rel_large));
  r.measurements.push_back(at_most("max |MC-DE|/DE, MF, N>=20", gap_small[0], rel_small));
  r.measurements.push_back(at_most("max |MC-DE|/DE, MMSE, N>=20", gap_small[1], rel_small));
  r.measurements.push_back(within("fraction of (point, detector) pairs with |MC-DE| <= k SE",
                                  total ? static_cast<double>(overlap) / total : 0.0,
                                  ctx.t("antenna_sweep.overlap_fraction"), 1.0));
  r.measurements.push_back(at_most("sweep rows with errors", errors, 0.0));
  r.note += "largest |MC-DE|/SE = " + fmt(worst_sigma) + " (" + worst + ")";
}

void check_specialization(Context& ctx, CheckResult& r) {
  const int n = 64, users = 4, cells = 4;
  const double alpha = 0.3;
  const double snrs[] = {0.1, 1.0, 10.0, 100.0, 1000.0};
  const int ratios[] = {1, 2, 4, 8, 16};
  double err_mf = 0.0, err_mmse = 0.0;
  for (double snr : snrs) {
    for (int ratio : ratios) {
      const int dof = ratio * users;
      model::SystemConfig config{cells, users, n, snr / n, kInfinity, ctx.options.seed};
      const auto spec = model::SimpleModelSpec::random_basis(n, dof, alpha, ctx.options.seed + dof);
      const auto profile = model::build_simple_profile(config, spec);
      const auto stats = model::estimator_statistics(profile, config, 0);
      const double lambda = detect::default_lambda(config);
      const auto mf = deteq::de_sinr_mf(profile, stats, config);
      const auto mmse = deteq::de_sinr_mmse(profile, stats, config, lambda);
      const closedform::SimpleSystemPoint point{snr, static_cast<double>(ratio), alpha, cells, lambda};
      const double cf_mf = closedform::gamma_mf_simple(point).gamma;
      const double cf_mmse = closedform::gamma_mmse_simple(point).gamma;
      for (int m = 0; m < users; ++m) {
        err_mf = std::max(err_mf, std::abs(mf.users[m].gamma - cf_mf) / cf_mf);
        err_mmse = std::max(err_mmse, std::abs(mmse.users[m].gamma - cf_mmse) / cf_mmse);
      }
    }
  }
  const double tol = ctx.t("specialization.rel");
  r.measurements.push_back(at_most("max rel error, MF equivalent vs closed form (5x5 grid)", err_mf, tol));
  r.measurements.push_back(at_most("max rel error, MMSE equivalent vs closed form (5x5 grid)", err_mmse, tol));
}

void check_rmt(Context& ctx, CheckResult& r) {
  const std::uint64_t seed = ctx.options.seed;

  // (a) identity covariances with K = N and rho = 1: delta^2 + delta - 1 = 0.
  {
    const int n = 16;
    rmt::FixedPointProblem p;
    p.D = CMatrix::Identity(n, n);
    p.S = CMatrix::Zero(n, n);
    p.rho = 1.0;
    p.R.assign(n, CMatrix::Identity(n, n));
    const auto sol = rmt::solve_fixed_point(p);
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    r.measurements.push_back(at_most("(a) max |delta_k - (sqrt5-1)/2|", (sol.delta.array() - golden).abs().maxCoeff(),
                                     ctx.t("rmt_equivalents.golden")));
  }

  // (b) independence from the starting point.
  {
    const auto p = random_problem(seed, 101, 32, 12, 0.3);
    const rmt::FixedPointOptions base;
    const auto ref = rmt::solve_fixed_point(p, base);
    auto engine = rng::substream(seed, rng::Purpose::kTestInstance, {102});
    std::uniform_real_distribution<double> start(0.01, 20.0);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      rmt::FixedPointOptions o = base;
      RVector init(p.size());
      for (int k = 0; k < p.size(); ++k) init(k) = start(engine);
      o.initial = init;
      worst = std::max(worst, (rmt::solve_fixed_point(p, o).delta - ref.delta).cwiseAbs().maxCoeff());
    }
    const double bound =
        ctx.t("rmt_equivalents.init_factor") * (base.abs_tolerance + base.rel_tolerance * ref.delta.cwiseAbs().maxCoeff());
    r.measurements.push_back(at_most("(b) max |delta - delta_ref| over 10 random starts", worst, bound));
  }

  // (c) derivative with Theta = I against central differences in rho.
  {
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) {
      auto engine = rng::substream(seed, rng::Purpose::kTestInstance, {200, static_cast<std::uint64_t>(i)});
      const double rho = std::uniform_real_distribution<double>(0.2, 2.0)(engine);
      auto p = random_problem(seed, 210 + i, 24, 8, rho);
      const auto sol = rmt::solve_fixed_point(p);
      const auto d = rmt::solve_derivative(p, sol, CMatrix::Identity(24, 24));
      const double analytic = rmt::trace_functional(p.D, d.T_prime);
      const double h = 1e-4 * rho;
      auto f = [&](double x) {
        rmt::FixedPointProblem q = p;
        q.rho = x;
        return rmt::trace_functional(q.D, rmt::solve_fixed_point(q).T);
      };
      const double numeric = -(f(rho + h) - f(rho - h)) / (2.0 * h);
      worst = std::max(worst, std::abs(analytic - numeric) / std::abs(numeric));
    }
    r.measurements.push_back(
        at_most("(c) max rel error, derivative vs -dT/drho (5 instances)", worst, ctx.t("rmt_equivalents.derivative_rel")));
  }

  // (d) both trace functionals against the resolvent Monte Carlo oracle.
  {
    const int n = 64, k = 16, draws = 200;
    const auto p = random_problem(seed, 300, n, k, 0.5);
    auto engine = rng::substream(seed, rng::Purpose::kTestInstance, {301});
    const CMatrix theta = random_psd(engine, n, n);
    const auto sol = rmt::solve_fixed_point(p);
    const auto d = rmt::solve_derivative(p, sol, theta);
    const auto lin = rmt::resolvent_trace_oracle(p, std::nullopt, draws, seed + 302);
    const auto quad = rmt::resolvent_trace_oracle(p, theta, draws, seed + 303);
    const double k_se = ctx.t("rmt_equivalents.oracle_se");
    r.measurements.push_back(at_most("(d) |(1/N) tr DT - oracle| / SE (N=64, K=16, 200 draws)",
                                     std::abs(rmt::trace_functional(p.D, sol.T) - lin.mean) / lin.std_error, k_se));
    r.measurements.push_back(at_most("(d) |(1/N) tr DT' - oracle| / SE (N=64, K=16, 200 draws)",
                                     std::abs(rmt::trace_functional(p.D, d.T_prime) - quad.mean) / quad.std_error, k_se));
  }
}

void check_ordering(Context& ctx, CheckResult& r) {
  const double slack = ctx.t("detector_ordering.slack");
  const auto& sweep = ctx.antenna_sweep();
  double worst = kInf;
  long violations = 0, pairs = 0;
  for (const auto& row : sweep) {
    if (row.status != "ok") continue;
    const RMatrix diff = row.samples.mmse - row.samples.mf;
    worst = std::min(worst, diff.minCoeff());
    violations += (diff.array() < -slack).count();
    pairs += diff.size();
  }
  r.measurements.push_back(within("min paired (MMSE - MF) rate over sweep trials and users", worst, slack > 0.0 ? -slack : 0.0, kInf));
  r.note = std::to_string(violations) + " of " + std::to_string(pairs) + " paired samples below -slack";

  double worst_ratio = kInf;
  int singular = 0;
  for (double alpha : {0.3, 0.1}) {
    for (int i = 0; i < 10; ++i) {
      const double snr = std::pow(10.0, (-10.0 + 50.0 * i / 9.0) / 10.0);
      for (int q = 0; q < 10; ++q) {
        const double ratio = std::pow(10.0, -1.0 + 4.0 * q / 9.0);
        const closedform::SimpleSystemPoint point{snr, ratio, alpha, 4, 0.0};
        try {
          worst_ratio = std::min(worst_ratio, closedform::gamma_mmse_simple(point).gamma /
                                                  closedform::gamma_mf_simple(point).gamma);
        } catch (const SingularityError&) {
          ++singular;
        }
      }
    }
  }
  r.measurements.push_back(within("min closed-form MMSE/MF SINR ratio (10x10 grid, alpha 0.3 and 0.1)", worst_ratio,
                                  1.0, kInf));
  r.measurements.push_back(at_most("closed-form grid points where the MMSE form is undefined", singular, 0.0));
}

void check_conditional_oracle(Context& ctx, CheckResult& r) {
  const int instances = 20, draws = 4000;
  double worst = 0.0;
  int compared = 0;
  for (int i = 0; i < instances; ++i) {
    auto engine = rng::substream(ctx.options.seed, rng::Purpose::kTestInstance, {400, static_cast<std::uint64_t>(i)});
    auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(engine); };
    auto integer = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(engine); };
    const int cells = integer(2, 3), users = integer(2, 3), n = integer(6, 16);
    model::SystemConfig config{cells, users, n, uniform(0.5, 5.0), i % 2 ? uniform(1.0, 20.0) : kInfinity,
                               ctx.options.seed + static_cast<std::uint64_t>(i)};
    std::vector<CMatrix> factors;
    for (int j = 0; j < cells; ++j)
      for (int l = 0; l < cells; ++l)
        for (int k = 0; k < users; ++k) {
          const int rank = integer(1, n);
          const double gain = l == j ? 1.0 : uniform(0.05, 0.8);
          factors.push_back(rng::circular_gaussian(engine, n, rank) * std::sqrt(gain / rank));
        }
    const model::CorrelationProfile profile(cells, users, n, std::move(factors));
    const int j = integer(0, cells - 1);
    const auto stats = model::estimator_statistics(profile, config, j);
    const auto pilots = model::draw_cell_pilots(profile, config, 0, j);
    const auto est = model::estimate_cell(profile, stats, pilots);
    const auto interference = detect::interference_matrix(profile, stats);
    const auto filter = i % 4 < 2 ? detect::matched_filter(est)
                                  : detect::mmse_filter(est, interference, detect::default_lambda(config));
    const auto analytic = detect::conditional_sinr(filter, est, interference, config);
    const auto oracle = detect::nested_denominator_oracle(profile, config, stats, pilots, filter, draws,
                                                          ctx.options.seed + 1000 + static_cast<std::uint64_t>(i));
    for (int m = 0; m < users; ++m) {
      const double sigma = std::abs(analytic[m].denominator() - oracle.mean(m)) / oracle.std_error(m);
      worst = std::max(worst, sigma);
      ++compared;
    }
  }
  r.measurements.push_back(at_most("max |analytic - nested MC| / SE over users of 20 instances (N<=16)", worst,
                                   ctx.t("conditional_sinr_oracle.se")));
  r.note = std::to_string(compared) + " user denominators compared, " + std::to_string(draws) + " draws each";
}

struct CheckDef {
  const char* name;
  const char* description;
  void (*run)(Context&, CheckResult&);
};

const std::vector<CheckDef>& registry() {
  static const std::vector<CheckDef> checks = {
      {"r_inf", "ultimate rate limits R_inf for alpha 0.3 and 0.1, L=4", check_r_inf},
      {"dof_anchor", "DoF per user for 90% of R_inf at rhoN=20 dB, alpha=0.3", check_dof_anchor},
      {"rate_anchor", "MF rate at P/K=90, alpha=0.1 and the matching MMSE DoF", check_rate_anchor},
      {"antenna_sweep", "Monte Carlo vs deterministic equivalent over the antenna sweep", check_antenna_sweep},
      {"specialization", "general deterministic equivalents reduce to the closed forms", check_specialization},
      {"rmt_equivalents", "fixed point, its derivative and resolvent oracles", check_rmt},
      {"detector_ordering", "MMSE never below MF (paired trials and closed forms)", check_ordering},
      {"conditional_sinr_oracle", "conditional SINR denominator vs nested Monte Carlo", check_conditional_oracle},
  };
  return checks;
}

}  // namespace

std::vector<std::string> check_names() {
  std::vector<std::string> out;
  for (const auto& c : registry()) out.emplace_back(c.name);
  return out;
}

std::map<std::string, double> default_tolerances() {
  return {
      {"r_inf.abs", 0.005},
      {"dof_anchor.mf_abs", 0.1},
      {"dof_anchor.mmse_lo", 53.0},
      {"dof_anchor.mmse_hi", 66.0},
      {"rate_anchor.rate_abs", 0.02},
      {"rate_anchor.fraction_abs", 0.01},
      {"rate_anchor.mmse_lo", 30.0},
      {"rate_anchor.mmse_hi", 42.0},
      {"antenna_sweep.rel_large", 0.05},
      {"antenna_sweep.rel_small", 0.10},
      {"antenna_sweep.overlap_se", 2.0},
      {"antenna_sweep.overlap_fraction", 0.9},
      {"specialization.rel", 1e-6},
      {"rmt_equivalents.golden", 1e-10},
      {"rmt_equivalents.init_factor", 10.0},
      {"rmt_equivalents.derivative_rel", 1e-5},
      {"rmt_equivalents.oracle_se", 3.0},
      {"detector_ordering.slack", 0.0},
      {"conditional_sinr_oracle.se", 3.0},
  };
}

std::vector<CheckResult> run_suite(const SuiteOptions& options,
                                   const std::function<void(const CheckResult&)>& on_result) {
  std::vector<std::string> selected = options.checks;
  if (selected.empty()) selected = check_names();
  if (selected.empty()) throw ConfigError("empty check selection");
  for (const auto& name : selected) {
    const auto& reg = registry();
    if (std::none_of(reg.begin(), reg.end(), [&](const CheckDef& c) { return name == c.name; })) {
      throw ConfigError("unknown check '" + name + "'");
    }
  }
  Context ctx{options, default_tolerances(), std::nullopt};
  for (const auto& [key, value] : options.tolerances) {
    if (!ctx.tol.count(key)) throw ConfigError("unknown tolerance '" + key + "'");
    ctx.tol[key] = value;
  }
  if (options.trials < 1) throw ConfigError("validation needs at least one trial");

  std::vector<CheckResult> results;
  for (const auto& def : registry()) {
    if (std::find(selected.begin(), selected.end(), def.name) == selected.end()) continue;
    CheckResult r;
    r.name = def.name;
    r.description = def.description;
    const auto start = std::chrono::steady_clock::now();
    try {
      def.run(ctx, r);
      r.passed = !r.measurements.empty() &&
                 std::all_of(r.measurements.begin(), r.measurements.end(), [](const Measurement& m) { return m.passed; });
    } catch (const std::exception& e) {
      r.passed = false;
      r.note = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (on_result) on_result(r);
    results.push_back(std::move(r));
  }
  return results;
}

void write_report_csv(std::ostream& out, const std::vector<CheckResult>& results) {
  auto clean = [](std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    return s;
  };
  out << "check,measurement,value,lo,hi,passed\n";
  for (const auto& r : results) {
    for (const auto& m : r.measurements) {
      out << r.name << ',' << clean(m.label) << ',' << fmt(m.value) << ',' << fmt(m.lo) << ',' << fmt(m.hi) << ','
          << (m.passed ? "true" : "false") << '\n';
    }
    out << r.name << ",,,,," << (r.passed ? "true" : "false") << '\n';
  }
}

std::string format_result(const CheckResult& r) {
  std::ostringstream out;
  char seconds[32];
  std::snprintf(seconds, sizeof seconds, "%.1f s", r.seconds);
  out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.description << " (" << seconds << ")\n";
  for (const auto& m : r.measurements) {
    out << "    [" << (m.passed ? "ok" : "xx") << "] " << m.label << " = " << fmt(m.value) << "  in [" << fmt(m.lo)
        << ", " << fmt(m.hi) << "]\n";
  }
  if (!r.note.empty()) out << "    note: " << r.note << '\n';
  return out.str();
}

}  // namespace mmimo::validation
