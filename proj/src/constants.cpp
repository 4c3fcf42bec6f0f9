#include "pks/constants.hpp"

#include <cmath>
#include <numbers>

namespace pks::constants {

namespace {
constexpr double kPi = std::numbers::pi;
}

double c_hls() {
  // Lieb's diagonal case, d = 2 and lam = 1:
  // pi^{lam/2} Gamma(d/2 - lam/2)/Gamma(d - lam/2) (Gamma(d/2)/Gamma(d))^{-1 + lam/d} with lam = d(2 - 2/p) = 1
  const double lam = 1.0;
  return std::pow(kPi, lam / 2.0) * std::tgamma(1.0 - lam / 2.0) / std::tgamma(2.0 - lam / 2.0) *
         std::pow(std::tgamma(1.0) / std::tgamma(2.0), -1.0 + lam / 2.0);
}

double gamma_norm_43() { return std::pow(1.5 * kPi, 0.75) / (2.0 * kPi); }

double gamma_norm_2() { return 1.0 / (2.0 * std::sqrt(kPi)); }

double x_gamma_norm_43() {
  // int |x|^{4/3} gamma^{4/3} = (2 pi)^{-4/3} 2 pi Gamma(5/3) / (2 (2/3)^{5/3})
  const double integral = std::pow(2.0 * kPi, -4.0 / 3.0) * 2.0 * kPi * std::tgamma(5.0 / 3.0) /
                          (2.0 * std::pow(2.0 / 3.0, 5.0 / 3.0));
  return std::pow(integral, 0.75);
}

double big_lambda() {
  double p = 1.0, t = 0.25;
  for (int m = 1; m <= 80; ++m) {
    t *= 0.5;
    p *= 1.0 - t;
  }
  return p;
}

double eta_star() { return 0.2 * std::exp(-0.2); }

double critical_free_energy() { return 8.0 * kPi * (std::log(8.0) - 1.0); }

double log_hls_constant(double M) { return M * (1.0 + std::log(kPi) - std::log(M)); }

double kappa(double M, double lambda) { return 2.0 * std::sqrt(kPi / (M * lambda)); }

}  // namespace pks::constants
