#include "pks/grid.hpp"

#include <gsl/gsl_integration.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace pks {

GridSpec::GridSpec(int n_, double L_) : n(n_), L(L_) {
  if (n < 16 || n % 2 != 0) throw std::invalid_argument("grid: n must be even and >= 16");
  if (!(L > 0.0)) throw std::invalid_argument("grid: L must be positive");
}

Density::Density(GridSpec spec) : spec_(spec), v_(spec.size(), 0.0) {}

Density::Density(GridSpec spec, std::vector<double> values) : spec_(spec), v_(std::move(values)) {
  validate_and_cache();
}

void Density::assign(std::vector<double> values) {
  v_ = std::move(values);
  validate_and_cache();
}

void Density::scale_to_mass(double M) {
  if (!(mass_ > 0.0)) throw std::domain_error("density: cannot rescale zero mass");
  const double s = M / mass_;
  for (double& x : v_) x *= s;
  validate_and_cache();
}

void Density::validate_and_cache() {
  if (v_.size() != spec_.size()) throw std::invalid_argument("density: size mismatch");
  double s = 0.0;
  for (double x : v_) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::domain_error("density: negative or non-finite value");
    s += x;
  }
  mass_ = s * spec_.cell_area();
}

double steady_state_value(const SteadyStateParams& p, double x, double y) {
  const double d = p.lambda + x * x + y * y;
  return p.M / std::numbers::pi * p.lambda / (d * d);
}

static void check_params(const SteadyStateParams& p) {
  if (!(p.lambda > 0.0)) throw std::invalid_argument("steady_state: lambda must be positive");
  if (!(p.M > 0.0)) throw std::invalid_argument("steady_state: mass must be positive");
}

Density steady_state(const SteadyStateParams& p, Vec2 offset, const GridSpec& spec) {
  check_params(p);
  std::vector<double> v(spec.size());
  for (int i = 0; i < spec.n; ++i)
    for (int j = 0; j < spec.n; ++j)
      v[spec.index(i, j)] =
          steady_state_value(p, spec.center(i) - offset[0], spec.center(j) - offset[1]);
  return Density(spec, std::move(v));
}

double steady_state_disk_tail(const SteadyStateParams& p, double s) {
  check_params(p);
  return p.M / (1.0 + s * s);
}

namespace {

// Integral over y in [-L, L] of lambda/(lambda+x^2+y^2)^2.
double strip_integral(double x, double lambda, double L) {
  const double b2 = lambda + x * x;
  const double b = std::sqrt(b2);
  return 2.0 * lambda * (L / (2.0 * b2 * (b2 + L * L)) + std::atan(L / b) / (2.0 * b2 * b));
}

double strip_cb(double x, void* params) {
  const auto* q = static_cast<const double*>(params);
  return strip_integral(x, q[0], q[1]);
}

}  // namespace

double steady_state_box_tail(const SteadyStateParams& p, double L) {
  check_params(p);
  double q[2] = {p.lambda, L};
  gsl_function F{&strip_cb, q};
  gsl_integration_workspace* ws = gsl_integration_workspace_alloc(1000);
  double inside = 0.0, err = 0.0;
  gsl_integration_qag(&F, 0.0, L, 0.0, 1e-13, 1000, GSL_INTEG_GAUSS61, ws, &inside, &err);
  gsl_integration_workspace_free(ws);
  inside *= 2.0;  // x in [-L, 0] by symmetry
  return p.M * (1.0 - inside / std::numbers::pi);
}

double mass(const Density& rho) { return rho.mass(); }

double moment(const Density& rho, double q) {
  if (!(q >= 0.0) || q >= 2.0) throw std::invalid_argument("moment: q must lie in [0,2)");
  const GridSpec& g = rho.spec();
  double s = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const double r = std::hypot(g.center(i), g.center(j));
      s += (q == 0.0 ? 1.0 : std::pow(r, q)) * rho.at(i, j);
    }
  return s * g.cell_area();
}

double lp_norm(const Density& rho, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: p must be >= 1");
  double s = 0.0;
  for (double x : rho.values()) s += std::pow(x, p);
  return std::pow(s * rho.spec().cell_area(), 1.0 / p);
}

namespace {

// Derivative along one line of stride `stride`: fourth order inside, second order near the ends.
double line_derivative(const double* f, int i, int n, std::ptrdiff_t stride, double h) {
  auto at = [&](int k) { return f[k * stride]; };
  if (i >= 2 && i <= n - 3)
    return (at(i - 2) - 8.0 * at(i - 1) + 8.0 * at(i + 1) - at(i + 2)) / (12.0 * h);
  if (i == 0) return (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
  if (i == n - 1) return (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h);
  return (at(i + 1) - at(i - 1)) / (2.0 * h);
}

}  // namespace

void grid_gradient(const GridSpec& g, const std::vector<double>& f, std::vector<double>& gx,
                   std::vector<double>& gy) {
  const int n = g.n;
  const double h = g.h();
  gx.assign(g.size(), 0.0);
  gy.assign(g.size(), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::size_t k = g.index(i, j);
      gx[k] = line_derivative(f.data() + g.index(0, j), i, n, n, h);
      gy[k] = line_derivative(f.data() + g.index(i, 0), j, n, 1, h);
    }
}

double far_field_tail(const GridSpec& g, const std::vector<double>& integrand) {
  double c = 0.0;
  int cells = 0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      if (i != 0 && j != 0 && i != g.n - 1 && j != g.n - 1) continue;
      const double x = g.center(i), y = g.center(j);
      const double r2 = x * x + y * y;
      c += integrand[g.index(i, j)] * r2 * r2;
      ++cells;
    }
  c /= cells;
  // integral of |x|^{-4} over the complement of [-L, L]^2
  return c * (std::numbers::pi / 2.0 + 1.0) / (g.L * g.L);
}

double grad_quarter_energy(const Density& rho) {
  const GridSpec& g = rho.spec();
  std::vector<double> f(g.size()), gx, gy;
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = rho[k] > 0.0 ? std::pow(rho[k], 0.25) : 0.0;
  grid_gradient(g, f, gx, gy);
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = gx[k] * gx[k] + gy[k] * gy[k];
    s += f[k];
  }
  return s * g.cell_area() + far_field_tail(g, f);
}

double tail_mass(const Density& rho, double r2) {
  const GridSpec& g = rho.spec();
  const double h = g.h();
  const double r = std::sqrt(r2);
  constexpr int kSub = 16;
  double s = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const double x = g.center(i), y = g.center(j);
      const double d = std::hypot(x, y);
      double frac;
      if (d - h >= r) {
        frac = 1.0;
      } else if (d + h <= r) {
        frac = 0.0;
      } else {
        // Cell straddles the circle: area fraction outside by sub-sampling.
        int out = 0;
        for (int a = 0; a < kSub; ++a)
          for (int b = 0; b < kSub; ++b) {
            const double px = x + ((a + 0.5) / kSub - 0.5) * h;
            const double py = y + ((b + 0.5) / kSub - 0.5) * h;
            if (px * px + py * py >= r2) ++out;
          }
        frac = static_cast<double>(out) / (kSub * kSub);
      }
      s += frac * rho.at(i, j);
    }
  return s * g.cell_area();
}

double l1_distance(const Density& a, const Density& b) {
  if (!(a.spec() == b.spec())) throw std::invalid_argument("l1_distance: grid mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a[k] - b[k]);
  return s * a.spec().cell_area();
}

void write_grid(std::ostream& os, const Density& rho) {
  const GridSpec& g = rho.spec();
  os << std::setprecision(17);
  os << g.n << ' ' << g.n << ' ' << g.L << ' ' << rho.mass() << '\n';
  for (double x : rho.values()) os << x << '\n';
}

Density read_grid(std::istream& is) {
  int nx = 0, ny = 0;
  double L = 0.0, M = 0.0;
  if (!(is >> nx >> ny >> L >> M)) throw std::runtime_error("grid file: bad header");
  if (nx != ny) throw std::runtime_error("grid file: only square grids are supported");
  GridSpec g(nx, L);
  std::vector<double> v(g.size());
  for (double& x : v)
    if (!(is >> x)) throw std::runtime_error("grid file: truncated values");
  Density rho(g, std::move(v));
  if (M > 0.0 && std::abs(rho.mass() - M) > 1e-9 * M)
    throw std::runtime_error("grid file: header mass disagrees with values");
  return rho;
}

void write_grid_file(const std::string& path, const Density& rho) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  write_grid(os, rho);
}

Density read_grid_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_grid(is);
}

}  // namespace pks
