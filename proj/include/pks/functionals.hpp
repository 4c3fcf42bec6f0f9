#pragma once

#include "pks/grid.hpp"

namespace pks {

struct FunctionalReport {
  double entropy = 0.0;
  double interaction = 0.0;
  double free_energy = 0.0;
  double h_lambda = 0.0;
  double h_lambda_tail = 0.0;
  double h_lambda_delta = 0.0;
  double dissipation = 0.0;
  double grad_quarter = 0.0;
  double l32_power = 0.0;  // integral of rho^{3/2}
  double mass = 0.0;
};

struct HLambdaValue {
  double value = 0.0;
  // Uncertainty from the box complement, assuming the integrand continues with |x|^{-4} decay.
  double tail = 0.0;
};

double entropy(const Density& rho);
double interaction(const Density& rho, double eps);
double free_energy(const Density& rho, double eps);
// Mass of the plane profile whose restriction to the box carries the mass of rho.
double profile_mass(const Density& rho, double lambda);
// H_lambda against the profile of mass profile_mass(rho, lambda).
HLambdaValue h_lambda_full(const Density& rho, double lambda);
double h_lambda(const Density& rho, double lambda);
double h_lambda_delta(const Density& rho, double lambda, double delta);
double dissipation(const Density& rho);
// integral of rho log(e + |x|^2)
double log_weighted_l1(const Density& rho);
// integral of rho log|x - y| rho (eps = 0 grid kernel)
double log_interaction(const Density& rho);

bool is_critical_mass(double M, double rel_tol = 1e-2);

FunctionalReport evaluate_functionals(const Density& rho, double eps, double lambda,
                                      double delta = 1e-6);

}  // namespace pks
