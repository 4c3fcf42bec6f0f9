#include "pks/functionals.hpp"

#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>

#include "pks/kernels.hpp"

namespace pks {

namespace {
constexpr double kPi = std::numbers::pi;
}

double entropy(const Density& rho) {
  double s = 0.0;
  for (double v : rho.values())
    if (v > 0.0) s += v * std::log(v);
  return s * rho.spec().cell_area();
}

double interaction(const Density& rho, double eps) {
  const std::vector<double> c = potential_values(rho, eps);
  double s = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) s += rho[k] * c[k];
  return s * rho.spec().cell_area();
}

double free_energy(const Density& rho, double eps) {
  return entropy(rho) - 0.5 * interaction(rho, eps);
}

double profile_mass(const Density& rho, double lambda) {
  return rho.mass() / (1.0 - steady_state_box_tail({lambda, 1.0}, rho.spec().L));
}

HLambdaValue h_lambda_full(const Density& rho, double lambda) {
  const GridSpec& g = rho.spec();
  const SteadyStateParams p{lambda, profile_mass(rho, lambda)};
  std::vector<double> term(g.size());
  double s = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const double sq = std::sqrt(steady_state_value(p, g.center(i), g.center(j)));
      const double d = std::sqrt(rho.at(i, j)) - sq;
      const std::size_t k = g.index(i, j);
      term[k] = d * d / sq;
      s += term[k];
    }
  HLambdaValue out;
  out.value = s * g.cell_area();
  out.tail = far_field_tail(g, term);
  return out;
}

double h_lambda(const Density& rho, double lambda) { return h_lambda_full(rho, lambda).value; }

double h_lambda_delta(const Density& rho, double lambda, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("h_lambda_delta: delta must be positive");
  const GridSpec& g = rho.spec();
  const SteadyStateParams p{lambda, profile_mass(rho, lambda)};
  double s = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const double sq = std::sqrt(steady_state_value(p, g.center(i), g.center(j)) + delta);
      const double d = std::sqrt(rho.at(i, j) + delta) - sq;
      s += d * d / sq;
    }
  return s * g.cell_area();
}

double dissipation(const Density& rho) {
  if (!is_critical_mass(rho.mass()))
    std::cerr << "warning: dissipation evaluated at mass " << rho.mass()
              << "; nonnegativity only holds at mass 8 pi\n";
  return 8.0 * grad_quarter_energy(rho) - std::pow(lp_norm(rho, 1.5), 1.5);
}

double log_weighted_l1(const Density& rho) {
  const GridSpec& g = rho.spec();
  double s = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const double x = g.center(i), y = g.center(j);
      s += rho.at(i, j) * std::log(std::numbers::e + x * x + y * y);
    }
  return s * g.cell_area();
}

double log_interaction(const Density& rho) { return -2.0 * kPi * interaction(rho, 0.0); }

bool is_critical_mass(double M, double rel_tol) {
  return std::abs(M - 8.0 * kPi) <= rel_tol * 8.0 * kPi;
}

FunctionalReport evaluate_functionals(const Density& rho, double eps, double lambda, double delta) {
  FunctionalReport r;
  r.mass = rho.mass();
  r.entropy = entropy(rho);
  r.interaction = interaction(rho, eps);
  r.free_energy = r.entropy - 0.5 * r.interaction;
  const HLambdaValue hv = h_lambda_full(rho, lambda);
  r.h_lambda = hv.value;
  r.h_lambda_tail = hv.tail;
  r.h_lambda_delta = h_lambda_delta(rho, lambda, delta);
  r.grad_quarter = grad_quarter_energy(rho);
  r.l32_power = std::pow(lp_norm(rho, 1.5), 1.5);
  r.dissipation = 8.0 * r.grad_quarter - r.l32_power;
  return r;
}

}  // namespace pks
