#pragma once

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

// Adaptive 1D quadrature on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double rel = 1e-11) {
  gsl_set_error_handler_off();
  gsl_integration_workspace* w = gsl_integration_workspace_alloc(2000);
  gsl_function F;
  F.function = [](double x, void* p) { return (*static_cast<const std::function<double(double)>*>(p))(x); };
  F.params = const_cast<std::function<double(double)>*>(&f);
  double result = 0.0, err = 0.0;
  gsl_integration_qag(&F, a, b, 0.0, rel, 2000, GSL_INTEG_GAUSS41, w, &result, &err);
  gsl_integration_workspace_free(w);
  return result;
}

// Adaptive quadrature on [a, inf).
inline double integrate_to_inf(const std::function<double(double)>& f, double a, double rel = 1e-11) {
  gsl_set_error_handler_off();
  gsl_integration_workspace* w = gsl_integration_workspace_alloc(2000);
  gsl_function F;
  F.function = [](double x, void* p) { return (*static_cast<const std::function<double(double)>*>(p))(x); };
  F.params = const_cast<std::function<double(double)>*>(&f);
  double result = 0.0, err = 0.0;
  gsl_integration_qagiu(&F, a, 0.0, rel, 2000, w, &result, &err);
  gsl_integration_workspace_free(w);
  return result;
}

// Integral of f(x, y) over [-L, L]^2 by nested adaptive quadrature.
inline double box_integral(const std::function<double(double, double)>& f, double L,
                           double rel = 1e-9) {
  return integrate([&](double x) { return integrate([&](double y) { return f(x, y); }, -L, L, rel); },
                   -L, L, rel);
}

inline double profile(double M, double lambda, double x, double y) {
  const double d = lambda + x * x + y * y;
  return M / kPi * lambda / (d * d);
}

}  // namespace oracle
