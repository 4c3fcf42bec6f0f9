#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pks/grid.hpp"
#include "pks/transport.hpp"

namespace pks {

struct InequalityReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // signed so that the inequality reads slack >= 0
  double tol = 0.0;
  bool pass = false;
  bool skipped = false;
  std::string status;  // "ok", "fail", "skipped: ..." or a warning
  std::vector<std::pair<std::string, double>> constants;

  double constant(const std::string& key) const;
};

// Default tolerance 1e-3 max(|lhs|, |rhs|, 1).
double default_tolerance(double lhs, double rhs);
// Fills slack, tol, pass and status from lhs/rhs for an inequality of the form lhs <= rhs.
InequalityReport make_report(std::string name, double lhs, double rhs);

InequalityReport check_log_hls(const Density& rho);
InequalityReport check_gns(const Density& rho);
InequalityReport check_talagrand(const Density& rho, double lambda, const OTSolverConfig& cfg);
InequalityReport check_thick_tails(const Density& rho, double lambda, double s);
InequalityReport localization_bound(const Density& rho, double lambda, double q);
// Weight m(x) = sqrt(lambda + |x|^2).
InequalityReport neg_entropy_bound(const Density& rho, double lambda);

// Constant of the moment bound int rho^{...} used by the localization recipe:
// int |x|^q rho <= C (1 + H)^{q/2} for densities of mass M.
double localization_constant(double M, double lambda, double q);
// Explicit bound int sqrt(lambda + |x|^2) rho <= 2 sqrt(lambda) M + 2 M^{3/4} (lambda/pi)^{1/4} sqrt(H).
double first_moment_bound(double M, double lambda, double h);

struct CcfConstants {
  double a1 = 0.0;
  double a2 = 0.0;
  double a = 0.0;
  double alpha = 0.0;
  double R = 0.0;
  double entropy_constant = 0.0;  // C(8 pi, alpha, lambda)
  double gamma1 = 0.0;
  double c_ccf = 0.0;
};
CcfConstants ccf_constants(double lambda, double h_bound);
// C(M, alpha, lambda) from the entropy bound.
double entropy_bound_constant(double M, double alpha, double lambda);

struct CcdConstants {
  double gamma2 = 0.0;
  double alpha = 0.0;
  double log_beta = 0.0;
  double log_c_ccd = 0.0;         // log(256 pi^2 sqrt(beta)), the constant the recipe yields
  double log_c_ccd_stated = 0.0;  // log(248 pi^2 sqrt(beta)), as printed
  double c_ccd = 0.0;             // exp(log_c_ccd), +inf on overflow
};
// entropy_bound is a bound on int rho log rho (either (F + C_CCF)/gamma1 or a direct one).
CcdConstants ccd_constants(double entropy_bound, double gamma2);

InequalityReport check_ccf(const Density& rho, double lambda);
InequalityReport check_ccd(const Density& rho, double lambda, double gamma2 = 6.283185307179586);
// Same inequality with the entropy itself in place of the free-energy bound.
InequalityReport check_ccd_entropy(const Density& rho, double lambda,
                                   double gamma2 = 6.283185307179586);

}  // namespace pks
