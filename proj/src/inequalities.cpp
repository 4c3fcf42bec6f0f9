#include "pks/inequalities.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "pks/constants.hpp"
#include "pks/functionals.hpp"

namespace pks {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kE = std::numbers::e;

double positive_entropy(const Density& rho) {
  double s = 0.0;
  for (double v : rho.values())
    if (v > 1.0) s += v * std::log(v);
  return s * rho.spec().cell_area();
}

double negative_entropy(const Density& rho) {
  double s = 0.0;
  for (double v : rho.values())
    if (v > 0.0 && v < 1.0) s -= v * std::log(v);
  return s * rho.spec().cell_area();
}

// int varrho^p over the plane for the profile of mass M, p > 1/2
double profile_power_integral(double M, double lambda, double p) {
  return std::pow(M * lambda / kPi, p) * kPi * std::pow(lambda, 1.0 - 2.0 * p) / (2.0 * p - 1.0);
}

InequalityReport skipped_report(std::string name, const std::string& why) {
  InequalityReport r;
  r.name = std::move(name);
  r.pass = true;
  r.skipped = true;
  r.status = "skipped: " + why;
  return r;
}

// Grid value plus the estimate of the integrand off the box.
double h_for(const Density& rho, double lambda) {
  const HLambdaValue hv = h_lambda_full(rho, lambda);
  return hv.value + hv.tail;
}

}  // namespace

double InequalityReport::constant(const std::string& key) const {
  for (const auto& [k, v] : constants)
    if (k == key) return v;
  throw std::out_of_range("InequalityReport: no constant " + key);
}

double default_tolerance(double lhs, double rhs) {
  return 1e-3 * std::max({std::abs(lhs), std::abs(rhs), 1.0});
}

InequalityReport make_report(std::string name, double lhs, double rhs) {
  InequalityReport r;
  r.name = std::move(name);
  r.lhs = lhs;
  r.rhs = rhs;
  r.slack = rhs - lhs;
  r.tol = std::isfinite(rhs) ? default_tolerance(lhs, rhs) : default_tolerance(lhs, 0.0);
  r.pass = r.slack >= -r.tol;
  r.status = r.pass ? "ok" : "fail";
  return r;
}

InequalityReport check_log_hls(const Density& rho) {
  const double M = rho.mass();
  const double lhs = -(entropy(rho) + 2.0 / M * log_interaction(rho));
  InequalityReport r = make_report("log_hls", lhs, constants::log_hls_constant(M));
  r.constants = {{"C(M)", constants::log_hls_constant(M)}, {"M", M}};
  return r;
}

namespace {

// all three integrals carry the far-field extrapolation off the box
std::array<double, 3> gns_terms(const Density& rho) {
  const GridSpec& g = rho.spec();
  std::vector<double> f6v(rho.size());
  for (std::size_t k = 0; k < f6v.size(); ++k) f6v[k] = std::pow(rho[k], 1.5);
  const double f6 = std::pow(lp_norm(rho, 1.5), 1.5) + far_field_tail(g, f6v);
  const double f4 = rho.mass() + far_field_tail(g, rho.values());
  return {grad_quarter_energy(rho), f4, f6};
}

}  // namespace

InequalityReport check_gns(const Density& rho) {
  const auto [g2, f4, f6] = gns_terms(rho);
  InequalityReport r = make_report("gns", kPi * f6, g2 * f4);
  r.constants = {{"int|grad f|^2", g2}, {"int f^4", f4}, {"int f^6", f6}};
  // Quadrature tolerance: the equality-case slack of the steady state with the same peak on this grid.
  const double peak = *std::max_element(rho.values().begin(), rho.values().end());
  if (peak > 0.0) {
    const double mu = rho.mass() / (kPi * peak);
    const auto [e2, e4, e6] = gns_terms(steady_state({mu, rho.mass()}, {0.0, 0.0}, rho.spec()));
    const double quad = std::abs(e2 * e4 - kPi * e6) * (g2 * f4) / (e2 * e4);
    r.tol += quad;
    r.pass = r.slack >= -r.tol;
    r.status = r.pass ? "ok" : "fail";
    r.constants.push_back({"quadrature_tol", quad});
  }
  return r;
}

InequalityReport check_talagrand(const Density& rho, double lambda, const OTSolverConfig& cfg) {
  const double M = rho.mass();
  const double h = h_for(rho, lambda);
  const double kappa = constants::kappa(M, lambda);
  Density ref = steady_state({lambda, M}, {0.0, 0.0}, rho.spec());
  ref.scale_to_mass(M);
  const double w2 = wasserstein(rho, ref, 2.0, cfg).cost;
  InequalityReport r = make_report("talagrand", w2, std::sqrt(2.0 * std::max(h, 0.0) / kappa));
  r.constants = {{"kappa", kappa}, {"H_lambda", h}, {"W2", w2}};
  return r;
}

InequalityReport check_thick_tails(const Density& rho, double lambda, double s) {
  if (!(s > 1.0)) throw std::invalid_argument("check_thick_tails: s must exceed 1");
  const double M = rho.mass();
  const double h = h_for(rho, lambda);
  const double eta = constants::eta_star();
  const double rhs = eta * std::exp(-4.0 * h / std::sqrt(kPi * M * lambda)) * M / (1.0 + s * s);
  const double tail = tail_mass(rho, lambda * s * s);
  // written as rhs <= tail
  InequalityReport r = make_report("thick_tails", rhs, tail);
  r.constants = {{"eta_star", eta}, {"s", s}, {"H_lambda", h}};
  const double L = rho.spec().L;
  if (lambda * s * s >= L * L) {
    r.status += "; warning: annulus leaves the box, tail is truncated";
    std::cerr << "warning: thick tails radius " << std::sqrt(lambda) * s
              << " exceeds the half-width " << L << "\n";
  }
  return r;
}

double localization_constant(double M, double lambda, double q) {
  if (!(q > 0.0 && q < 2.0)) throw std::invalid_argument("localization: q must lie in (0,2)");
  // I_r := int varrho^{-r} rho <= B_k (1 + H)^{2 r} along r_k = 1/2 - 2^{-k}.
  const double r_target = q / 4.0;
  double r = 0.0, B = M;
  for (int k = 0; k < 200; ++k) {
    const double r_next = 0.5 * r + 0.25;
    const double B_next = profile_power_integral(M, lambda, 1.0 - r_next) +
                          std::sqrt(2.0 * (B + profile_power_integral(M, lambda, 1.0 - r)));
    if (r_next >= r_target) {
      // Hoelder interpolation between r and r_next
      const double theta = (r_next - r_target) / (r_next - r);
      const double Bq = std::pow(B, theta) * std::pow(B_next, 1.0 - theta);
      // varrho^{-q/4} >= (pi/(M lambda))^{q/4} |x|^q
      return std::pow(M * lambda / kPi, r_target) * Bq;
    }
    r = r_next;
    B = B_next;
  }
  throw std::runtime_error("localization: iteration did not reach q");
}

double first_moment_bound(double M, double lambda, double h) {
  return 2.0 * std::sqrt(lambda) * M +
         2.0 * std::pow(M, 0.75) * std::pow(lambda / kPi, 0.25) * std::sqrt(std::max(h, 0.0));
}

InequalityReport localization_bound(const Density& rho, double lambda, double q) {
  const double M = rho.mass();
  const double h = h_for(rho, lambda);
  const double C = localization_constant(M, lambda, q);
  InequalityReport r = make_report("localization", moment(rho, q), C * std::pow(1.0 + h, q / 2.0));
  r.constants = {{"C", C}, {"q", q}, {"H_lambda", h}};
  if (q == 1.0) r.constants.push_back({"first_moment_bound", first_moment_bound(M, lambda, h)});
  if (q > 1.9) r.status += "; report only (q > 1.9)";
  return r;
}

InequalityReport neg_entropy_bound(const Density& rho, double lambda) {
  const GridSpec& g = rho.spec();
  double mrho = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const double x = g.center(i), y = g.center(j);
      mrho += std::sqrt(lambda + x * x + y * y) * rho.at(i, j);
    }
  mrho *= g.cell_area();
  // int e^{-sqrt(lambda + |x|^2)} dx = 2 pi (1 + sqrt(lambda)) e^{-sqrt(lambda)}
  const double z = 2.0 * kPi * (1.0 + std::sqrt(lambda)) * std::exp(-std::sqrt(lambda));
  InequalityReport r = make_report("neg_entropy", negative_entropy(rho), mrho + z / kE);
  r.constants = {{"int m rho", mrho}, {"int e^-m", z}};
  return r;
}

namespace {

// ratio = t / (t - 1) with t = 8 pi alpha
double entropy_constant(double M, double alpha, double ratio, double lambda) {
  return alpha * M *
         (ratio / (lambda * kE) + 1.0 / kE - std::log(lambda / kPi) + 3.0 * std::max(std::log(M), 0.0));
}

}  // namespace

double entropy_bound_constant(double M, double alpha, double lambda) {
  const double t = 8.0 * kPi * alpha;
  if (!(t > 1.0)) throw std::invalid_argument("entropy bound: alpha must exceed 1/(8 pi)");
  return entropy_constant(M, alpha, t / (t - 1.0), lambda);
}

CcfConstants ccf_constants(double lambda, double h_bound) {
  if (!(h_bound >= 0.0)) throw std::invalid_argument("ccf_constants: h_bound must be nonnegative");
  if (!(lambda > 0.0)) throw std::invalid_argument("ccf_constants: lambda must be positive");
  const double M = 8.0 * kPi;
  CcfConstants c;
  const double root = std::sqrt(h_bound / std::sqrt(M * kPi * lambda));
  c.R = 4.0 * std::sqrt(lambda) * (1.0 + root) + 1.0;
  c.a1 = 4.0 * kPi;
  const double den = 4.0 * std::sqrt(lambda) * (1.0 + root) + 2.0;
  c.a2 = 8.0 * kPi * lambda * constants::eta_star() *
         std::exp(-4.0 * h_bound / std::sqrt(kPi * M * lambda)) / (den * den);
  c.a = std::min(c.a1, c.a2);
  c.alpha = 1.0 / (8.0 * kPi - 0.5 * c.a);
  c.gamma1 = c.a / (16.0 * kPi - c.a);
  // alpha = 1/(8 pi - a/2) gives t/(t - 1) = 16 pi / a without cancellation
  c.entropy_constant = entropy_constant(M, c.alpha, 16.0 * kPi / c.a, lambda);
  const double b1 = first_moment_bound(M, lambda, h_bound);
  const double z = 2.0 * kPi * (1.0 + std::sqrt(lambda)) * std::exp(-std::sqrt(lambda));
  c.c_ccf = 2.0 * c.entropy_constant + 32.0 * kPi * c.alpha * std::log(b1) + b1 + z / kE;
  return c;
}

CcdConstants ccd_constants(double entropy_bound, double gamma2) {
  if (!(gamma2 > 0.0 && gamma2 < 4.0 * kPi))
    throw std::invalid_argument("ccd_constants: gamma2 must lie in (0, 4 pi)");
  CcdConstants c;
  c.gamma2 = gamma2;
  const double bound = std::max(entropy_bound, std::numeric_limits<double>::min());
  c.alpha = kPi / (8.0 * bound);
  // 32 alpha e^{1/alpha - 1} |A_beta| <= 4 pi - gamma2 with |A_beta| <= 8 pi / beta
  c.log_beta = std::log(256.0 * kPi * c.alpha / (4.0 * kPi - gamma2)) + 1.0 / c.alpha - 1.0;
  c.log_c_ccd = std::log(256.0 * kPi * kPi) + 0.5 * c.log_beta;
  c.log_c_ccd_stated = std::log(248.0 * kPi * kPi) + 0.5 * c.log_beta;
  c.c_ccd = std::exp(c.log_c_ccd);
  return c;
}

namespace {

InequalityReport ccd_report(std::string name, const Density& rho, const CcdConstants& cc) {
  const double lhs = cc.gamma2 * grad_quarter_energy(rho);
  const double rhs = kPi * dissipation(rho) + cc.c_ccd;
  InequalityReport r = make_report(std::move(name), lhs, rhs);
  r.constants = {{"gamma2", cc.gamma2},
                 {"alpha", cc.alpha},
                 {"log_beta", cc.log_beta},
                 {"log_C_CCD", cc.log_c_ccd},
                 {"log_C_CCD_stated", cc.log_c_ccd_stated}};
  return r;
}

}  // namespace

InequalityReport check_ccf(const Density& rho, double lambda) {
  if (!is_critical_mass(rho.mass())) return skipped_report("ccf", "off-critical");
  const double h = h_for(rho, lambda);
  const CcfConstants c = ccf_constants(lambda, std::max(h, 0.0));
  const double F = free_energy(rho, 0.0);
  InequalityReport r = make_report("ccf", c.gamma1 * positive_entropy(rho), F + c.c_ccf);
  r.constants = {{"gamma1", c.gamma1}, {"C_CCF", c.c_ccf}, {"a", c.a},   {"a1", c.a1},
                 {"a2", c.a2},         {"alpha", c.alpha}, {"R", c.R},   {"H_lambda", h},
                 {"C(M,alpha,lambda)", c.entropy_constant}};
  return r;
}

InequalityReport check_ccd(const Density& rho, double lambda, double gamma2) {
  if (!is_critical_mass(rho.mass())) return skipped_report("ccd", "off-critical");
  const double h = h_for(rho, lambda);
  const CcfConstants c = ccf_constants(lambda, std::max(h, 0.0));
  const double F = free_energy(rho, 0.0);
  InequalityReport r = ccd_report("ccd", rho, ccd_constants((F + c.c_ccf) / c.gamma1, gamma2));
  r.constants.push_back({"gamma1", c.gamma1});
  r.constants.push_back({"C_CCF", c.c_ccf});
  return r;
}

InequalityReport check_ccd_entropy(const Density& rho, double lambda, double gamma2) {
  (void)lambda;
  if (!is_critical_mass(rho.mass())) return skipped_report("ccd_entropy", "off-critical");
  return ccd_report("ccd_entropy", rho, ccd_constants(positive_entropy(rho), gamma2));
}

}  // namespace pks
