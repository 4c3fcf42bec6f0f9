#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <gsl/gsl_sf_expint.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "pks/constants.hpp"
#include "pks/grid.hpp"
#include "pks/kernels.hpp"

using namespace pks;
using oracle::kPi;

namespace {

// gamma_eps * G * gamma_eps at the origin by the radial double integral: the angular mean of
// ln|y - z| over both circles is ln max(|y|, |z|).
double double_convolution_at_origin(double eps) {
  auto g = [eps](double r) { return std::exp(-r * r / (2 * eps * eps)) / (2 * kPi * eps * eps); };
  const double R = 12.0 * eps;
  return oracle::integrate(
      [&](double r1) {
        const double inner = oracle::integrate(
            [&](double r2) {
              return g(r2) * 2 * kPi * r2 * (-std::log(std::max(r1, r2)) / (2 * kPi));
            },
            0.0, R, 1e-12);
        return g(r1) * 2 * kPi * r1 * inner;
      },
      0.0, R, 1e-12);
}

}  // namespace

TEST_CASE("green function values") {
  CHECK(green(1.0, 0.0) == doctest::Approx(0.0));
  CHECK(green(std::exp(1.0), 0.0) == doctest::Approx(-1.0 / (2 * kPi)));
  CHECK(green(0.0, 0.5) == doctest::Approx(std::log(2.0) / (2 * kPi)));
  CHECK_THROWS_AS(green(0.0, 0.0), std::domain_error);
}

TEST_CASE("exponential integral agrees with GSL") {
  for (double x : {1e-8, 1e-3, 0.2, 0.999, 1.0, 1.001, 2.5, 10.0, 40.0, 300.0}) {
    const double ref = gsl_sf_expint_E1(x);
    CHECK(std::abs(expint_e1(x) - ref) <= 1e-12 * std::max(1.0, ref));
  }
  CHECK_THROWS(expint_e1(0.0));
}

TEST_CASE("mollifier integrates to one") {
  const double eps = 0.3;
  const double total = oracle::integrate_to_inf(
      [eps](double r) { return 2 * kPi * r * mollifier(eps, r, 0.0); }, 0.0);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS(mollifier(0.0, 0.0, 0.0));
}

TEST_CASE("regularized kernel at the origin against the brute-force double convolution") {
  const double eps = 0.1;
  CHECK(green_reg(eps, 0.0, 0.0) == doctest::Approx(double_convolution_at_origin(eps)).epsilon(1e-4));
  CHECK_THROWS(green_reg(0.0, 1.0, 0.0));
  CHECK_THROWS(green_reg(-1.0, 1.0, 0.0));
}

TEST_CASE("regularized kernel away from the origin against radial quadrature") {
  // gamma_eps * gamma_eps is the Gaussian of variance 2 eps^2; its angular mean against ln|x - y|
  // is ln max(|x|, |y|).
  const double eps = 0.2;
  const double s2 = 2 * eps * eps;
  for (double r : {0.05, 0.3, 1.0}) {
    const double ref = oracle::integrate(
        [&](double t) {
          return std::exp(-t * t / (2 * s2)) / (2 * kPi * s2) * 2 * kPi * t *
                 (-std::log(std::max(r, t)) / (2 * kPi));
        },
        0.0, 15 * eps, 1e-12);
    CHECK(green_reg(eps, r, 0.0) == doctest::Approx(ref).epsilon(1e-8));
  }
}

TEST_CASE("ordering, monotonicity in eps and the lower bound") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int t = 0; t < 200; ++t) {
    const double x = u(gen), y = u(gen);
    const double e1 = 0.05 + 0.4 * std::abs(u(gen)) / 3.0;
    const double e2 = e1 * 1.7;
    // Far from the origin the gap is below double resolution; only the weak form is checkable there.
    if (std::hypot(x, y) < 6.0 * e2) {
      CHECK(green_reg(e1, x, y) > green_reg(e2, x, y));
      CHECK(green_reg(e1, x, y) < green(x, y));
    } else {
      CHECK(green_reg(e1, x, y) >= green_reg(e2, x, y));
      CHECK(green_reg(e1, x, y) <= green(x, y) + 1e-15);
    }
    const double px = u(gen), py = u(gen);
    const double qx = px - x, qy = py - y;
    const double lower = -(4.0 + std::log(std::exp(1.0) + px * px + py * py) +
                           std::log(std::exp(1.0) + qx * qx + qy * qy)) / (4 * kPi);
    CHECK(green_reg(e1, x, y) >= lower);
  }
}

TEST_CASE("bounded by C eps^{-2}") {
  for (double eps : {0.01, 0.1, 1.0}) {
    const double C = green_reg_bound_constant(eps);
    for (double r : {0.0, 1e-3, 0.1, 1.0, 10.0})
      CHECK(green_reg(eps, r, 0.0) <= C / (eps * eps) + 1e-12);
  }
}

TEST_CASE("cell-averaged diagonal matches direct cell quadrature") {
  const double h = 0.3;
  const double ref = oracle::integrate(
      [h](double x) {
        return oracle::integrate([x](double y) { return -std::log(std::hypot(x, y)) / (2 * kPi); },
                                 -h / 2, h / 2, 1e-10);
      },
      -h / 2, h / 2, 1e-10) / (h * h);
  CHECK(green_cell_average(0.0, h) == doctest::Approx(ref).epsilon(1e-8));
  const double eps = 0.2;
  const double ref_eps = oracle::integrate(
      [&](double x) {
        return oracle::integrate([&](double y) { return green_reg(eps, x, y); }, -h / 2, h / 2, 1e-10);
      },
      -h / 2, h / 2, 1e-10) / (h * h);
  CHECK(green_cell_average(eps, h) == doctest::Approx(ref_eps).epsilon(1e-8));
}

TEST_CASE("potential of the steady state satisfies the Poisson equation") {
  // Interior 5-point Laplacian of c against -rho; the error shrinks under refinement.
  auto error = [](int n) {
    const GridSpec g(n, 10.0);
    const Density rho = steady_state({1.0, 8 * kPi}, {0.0, 0.0}, g);
    const PotentialField c = potential(rho, 0.0);
    const double h = g.h();
    double err = 0.0;
    for (int i = 1; i < n - 1; ++i)
      for (int j = 1; j < n - 1; ++j) {
        if (std::hypot(g.center(i), g.center(j)) > 3.0) continue;
        const double lap = (c.c[g.index(i + 1, j)] + c.c[g.index(i - 1, j)] + c.c[g.index(i, j + 1)] +
                            c.c[g.index(i, j - 1)] - 4 * c.c[g.index(i, j)]) / (h * h);
        err = std::max(err, std::abs(lap + rho.at(i, j)));
      }
    return err;
  };
  const double e64 = error(64), e128 = error(128);
  CHECK(e64 < 0.1 * 8.0);
  CHECK(e128 < 0.4 * e64);
}

TEST_CASE("regularized potential gradient bound and symmetry") {
  const GridSpec g(128, 10.0);
  const Density rho = steady_state({0.5, 8 * kPi}, {0.0, 0.0}, g);
  const double eps = 0.1;
  const PotentialField c = potential(rho, eps);
  const double gn = constants::gamma_norm_43();
  CHECK(c.max_gradient() <= 4 * constants::c_hls() / eps * gn * gn);
  double asym = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      asym = std::max(asym, std::abs(c.gx[g.index(i, j)] + c.gx[g.index(g.n - 1 - i, j)]));
      asym = std::max(asym, std::abs(c.gy[g.index(i, j)] + c.gy[g.index(i, g.n - 1 - j)]));
    }
  CHECK(asym < 1e-10 * c.max_gradient());
}

TEST_CASE("potential is linear") {
  const GridSpec g(32, 4.0);
  const Density a = steady_state({1.0, 3.0}, {0.5, 0.0}, g);
  const Density b = steady_state({0.3, 2.0}, {-1.0, 1.0}, g);
  std::vector<double> s(g.size());
  for (std::size_t k = 0; k < s.size(); ++k) s[k] = a[k] + b[k];
  for (double eps : {0.0, 0.2}) {
    const auto ca = potential_values(a, eps), cb = potential_values(b, eps);
    const auto cs = potential_values(Density(g, s), eps);
    for (std::size_t k = 0; k < s.size(); ++k)
      CHECK(cs[k] == doctest::Approx(ca[k] + cb[k]).epsilon(1e-12).scale(1.0));
  }
}
