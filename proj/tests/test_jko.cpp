#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "oracle.hpp"
#include "pks/constants.hpp"
#include "pks/functionals.hpp"
#include "pks/grid.hpp"
#include "pks/jko.hpp"

using namespace pks;
using oracle::kPi;

namespace {

const double kMass = 8.0 * kPi;

// Small critical-mass translate used by the step-level tests.
Density small_translate(double a = 0.25) {
  Density rho = steady_state({1.0, kMass}, {a, 0.0}, GridSpec(32, 8.0));
  rho.scale_to_mass(kMass);
  return rho;
}

Density bump(const GridSpec& g, double radius, double M) {
  std::vector<double> v(g.size(), 0.0);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const double u = (g.center(i) * g.center(i) + g.center(j) * g.center(j)) / (radius * radius);
      if (u < 1.0) v[g.index(i, j)] = std::exp(-1.0 / (1.0 - u));
    }
  Density rho(g, v);
  rho.scale_to_mass(M);
  return rho;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pks_test_jko_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("infinite product Lambda") {
  // Frozen from a 30-digit evaluation of prod_{m>=1} (1 - 2^{-m}/4).
  CHECK(constants::big_lambda() == doctest::Approx(0.770101586898).epsilon(1e-12));
  double p = 1.0, prev = 1.0;
  for (int m = 1; m <= 10; ++m) {
    p *= 1.0 - std::ldexp(0.25, -m);
    CHECK(p < prev);
    prev = p;
  }
  CHECK(std::abs(p - constants::big_lambda()) < 1e-3);
}

TEST_CASE("schedule constants") {
  const Density rho0 = small_translate();
  const SchemeConfig c = schedule(1.0, rho0);
  const double gnorm = std::pow(oracle::integrate_to_inf(
      [](double r) { return 2 * kPi * r * std::pow(std::exp(-r * r / 2) / (2 * kPi), 4.0 / 3.0); }, 0.0), 0.75);
  const double xgnorm = std::pow(oracle::integrate_to_inf(
      [](double r) { return 2 * kPi * r * std::pow(r * std::exp(-r * r / 2) / (2 * kPi), 4.0 / 3.0); }, 0.0), 0.75);
  CHECK(constants::gamma_norm_43() == doctest::Approx(gnorm).epsilon(1e-9));
  CHECK(constants::x_gamma_norm_43() == doctest::Approx(xgnorm).epsilon(1e-9));
  CHECK(c.A == doctest::Approx(32 * kPi / std::sqrt(2.0) * constants::c_hls() * xgnorm).epsilon(1e-9));
  CHECK(c.c_rho0 == doctest::Approx(2 * c.h0 + 1));
  CHECK(c.q0 == doctest::Approx(c.c_rho0 - c.h0));
  CHECK(c.tau_star == doctest::Approx(std::min(c.big_lambda * c.q0 / (2 * c.A * gnorm), 1.0)));
  CHECK(c.tau == doctest::Approx(c.tau_star / 2));
  CHECK(c.gamma2 == doctest::Approx(2 * kPi));
}

TEST_CASE("regularization schedule shrinks by exactly four per step") {
  const SchemeConfig c = schedule(1.0, small_translate());
  for (int k = 0; k < 20; ++k) {
    // log eps_k is of order 1e6 here, so the difference carries absolute rounding of that size times ulp.
    const double ulp = 1e-15 * std::abs(c.log_eps_k(k));
    CHECK(std::abs(c.log_eps_k(k) - c.log_eps_k(k + 1) - std::log(4.0)) <= 4 * ulp);
    CHECK(c.log_eps_k(k) == doctest::Approx(c.log_z + 10.0 / 3.0 * std::log(c.tau) - k * std::log(4.0)));
  }
}

TEST_CASE("schedule preconditions") {
  const Density rho0 = small_translate();
  SchemeConfig c = schedule(1.0, rho0);
  CHECK_NOTHROW(validate_step_size(c));
  c.tau = c.tau_star;
  CHECK_THROWS_AS(validate_step_size(c), std::invalid_argument);
  c.tau = 2 * c.tau_star;
  CHECK_THROWS_AS(validate_step_size(c), std::invalid_argument);
  CHECK_THROWS_WITH(schedule(1.0, rho0, 0.5 * h_lambda(rho0, 1.0)),
                    doctest::Contains("initial slack violated"));
  Density sub = rho0;
  sub.scale_to_mass(4 * kPi);
  CHECK_THROWS_AS(schedule(1.0, sub), std::invalid_argument);
}

TEST_CASE("objective gradient matches central differences") {
  const Density prev = small_translate();
  const SchemeConfig cfg = schedule(1.0, prev);
  JkoObjective obj(prev, cfg.tau, 0.0, cfg);
  std::mt19937_64 gen(17);
  std::normal_distribution<double> nd(0.0, 1.0);
  const std::vector<double> base = obj.field(prev);
  for (int it = 0; it < 3; ++it) {
    std::vector<double> u = base, d(base.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
      u[k] += 0.05 * nd(gen);
      d[k] = nd(gen);
    }
    std::vector<double> grad;
    obj.value(u, &grad);
    double analytic = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) analytic += grad[k] * d[k];
    const double h = 1e-4;
    std::vector<double> up = u, um = u;
    for (std::size_t k = 0; k < u.size(); ++k) {
      up[k] += h * d[k];
      um[k] -= h * d[k];
    }
    const double fd = (obj.value(up) - obj.value(um)) / (2 * h);
    CHECK(std::abs(fd - analytic) <= 1e-5 * std::abs(analytic));
  }
}

TEST_CASE("one step: trial bound, energy-distance inequality and optimality residual") {
  const Density prev = small_translate();
  const SchemeConfig cfg = schedule(1.0, prev);
  const JkoStep s = jko_step(prev, cfg.tau, cfg.eps_k(1), cfg);
  CHECK(s.info.objective <= s.info.objective_prev);
  CHECK(s.rho.mass() == doctest::Approx(prev.mass()).epsilon(1e-6));
  const double dbias = dissipation_bias(prev.spec(), 1.0, prev.mass());
  const StepRecord r = step_diagnostics(prev, s, cfg.tau, cfg.eps_k(1), 1, cfg, dbias);
  CHECK(r.step_size_slack >= -r.budget);
  CHECK(r.w2_step * r.w2_step <=
        2 * cfg.tau * (free_energy(prev, r.eps_k) - free_energy(s.rho, r.eps_k)) + r.budget);
  CHECK(std::isfinite(r.h_dissipation_slack));
  CHECK(std::isfinite(r.f_monotonicity_slack));
  CHECK(r.lp_snapshot.size() == 3);

  // Perturbing the minimizer raises the Euler-Lagrange residual.
  const double at_min = el_residual(s.rho, prev, cfg.tau, r.eps_k, cfg);
  std::vector<double> v = s.rho.values();
  const GridSpec& g = s.rho.spec();
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) v[g.index(i, j)] *= 1.0 + 0.2 * std::sin(g.center(i)) * std::cos(0.5 * g.center(j));
  Density perturbed(g, v);
  perturbed.scale_to_mass(s.rho.mass());
  CHECK(el_residual(perturbed, prev, cfg.tau, r.eps_k, cfg) > 2 * at_min);
}

TEST_CASE("a step from the steady state barely moves") {
  Density rho = steady_state({1.0, kMass}, {0.0, 0.0}, GridSpec(32, 8.0));
  rho.scale_to_mass(kMass);
  const SchemeConfig cfg = schedule(1.0, rho);
  const JkoStep s = jko_step(rho, cfg.tau, cfg.eps_k(1), cfg);
  CHECK(s.info.objective <= s.info.objective_prev);
  CHECK(std::sqrt(s.w2_sq) < 1e-2 * std::sqrt(kMass) * rho.spec().h());
}

TEST_CASE("weak-form rate") {
  const GridSpec g(128, 6.0);
  TestFunction x;
  x.kind = TestFunction::Kind::Coordinate;
  const Density shifted = steady_state({1.0, kMass}, {0.7, -0.3}, GridSpec(128, 20.0));
  CHECK(std::abs(weak_form_rate(shifted, x)) < 1e-10);
  x.axis = 1;
  CHECK(std::abs(weak_form_rate(bump(g, 2.0, 4 * kPi), x)) < 1e-10);

  TestFunction sq;
  sq.kind = TestFunction::Kind::TruncatedSquare;
  sq.radius = 3.0;
  const double sub = weak_form_rate(bump(g, 2.0, 4 * kPi), sq);
  CHECK(sub == doctest::Approx(8 * kPi).epsilon(0.1));
  CHECK(std::abs(weak_form_rate(bump(g, 2.0, kMass), sq)) <= 0.1 * 8 * kPi);

  TestFunction b;
  b.kind = TestFunction::Kind::Bump;
  b.radius = 1.0;
  b.center = {0.5, 0.0};
  CHECK(std::isfinite(weak_form_rate(bump(g, 2.0, 4 * kPi), b)));
}

TEST_CASE("checkpointed runs resume bit for bit") {
  const Density rho0 = small_translate();
  SchemeConfig cfg = schedule(1.0, rho0);
  cfg.max_steps = 4;
  const auto full_dir = temp_dir("full"), part_dir = temp_dir("part");
  RunOptions full;
  full.checkpoint_dir = full_dir.string();
  const Trajectory a = run(rho0, cfg, full);
  REQUIRE(a.completed);
  CHECK(latest_checkpoint(full.checkpoint_dir) == 4);

  SchemeConfig half = cfg;
  half.max_steps = 2;
  RunOptions part;
  part.checkpoint_dir = part_dir.string();
  run(rho0, half, part);
  part.resume = true;
  const Trajectory b = run(rho0, cfg, part);
  REQUIRE(b.knots.size() == a.knots.size());
  for (std::size_t k = 0; k < a.knots.size(); ++k)
    CHECK(a.knots[k].values() == b.knots[k].values());

  // interpolants
  CHECK(a.piecewise_constant(1.5 * cfg.tau).values() == a.knots[2].values());
  OTSolverConfig ot;
  const Density mid = a.lipschitz(0.5 * cfg.tau, ot);
  CHECK(mid.mass() == doctest::Approx(rho0.mass()).epsilon(1e-6));
  std::filesystem::remove_all(full_dir);
  std::filesystem::remove_all(part_dir);
}
