#include "pks/kernels.hpp"

#include <fftw3.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>

namespace pks {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kEuler = std::numbers::egamma;

// sum_{k>=1} (-1)^{k+1} x^k / (k k!), so that E1(x) = -gamma - ln x + series
double e1_series(double x) {
  double term = x, s = x;
  for (int k = 2; k < 200; ++k) {
    term *= -x / k;
    const double add = term / k;
    s += add;
    if (std::abs(add) < 1e-17 * std::abs(s)) break;
  }
  return s;
}
}  // namespace

double expint_e1(double x) {
  if (!(x > 0.0)) throw std::domain_error("expint_e1: argument must be positive");
  if (x < 1.0) return -kEuler - std::log(x) + e1_series(x);
  // modified Lentz on the continued fraction e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
  const double tiny = 1e-300;
  double b = x + 1.0, c = 1.0 / tiny, d = 1.0 / b, hval = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    hval *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return hval * std::exp(-x);
}

double mollifier(double eps, double x, double y) {
  if (!(eps > 0.0)) throw std::invalid_argument("mollifier: eps must be positive");
  return std::exp(-(x * x + y * y) / (2.0 * eps * eps)) / (2.0 * kPi * eps * eps);
}

double green(double x, double y) {
  const double r = std::hypot(x, y);
  if (r == 0.0) throw std::domain_error("green: singular at the origin");
  return -std::log(r) / (2.0 * kPi);
}

double green_reg(double eps, double x, double y) {
  if (!(eps > 0.0)) throw std::invalid_argument("green_reg: eps must be positive");
  const double c = 4.0 * eps * eps;
  const double r2 = x * x + y * y;
  const double X = r2 / c;
  if (X < 1.0) return (kEuler - std::log(c) - e1_series(X)) / (4.0 * kPi);
  return -std::log(r2) / (4.0 * kPi) - expint_e1(X) / (4.0 * kPi);
}

double green_reg_radial_derivative(double eps, double r) {
  if (r == 0.0) return 0.0;
  if (eps == 0.0) return -1.0 / (2.0 * kPi * r);
  const double X = r * r / (4.0 * eps * eps);
  return -(-std::expm1(-X)) / (2.0 * kPi * r);
}

double green_reg_bound_constant(double eps) { return eps * eps * green_reg(eps, 0.0, 0.0); }

double green_cell_average(double eps, double h) {
  // mean of ln|x| over [-1/2,1/2]^2 is (pi/2 - 3 - ln 2)/2
  const double avg_log = std::log(h) + 0.5 * (kPi / 2.0 - 3.0 - std::log(2.0));
  const double g0 = -avg_log / (2.0 * kPi);
  if (eps == 0.0) return g0;
  if (!(eps > 0.0)) throw std::invalid_argument("green_cell_average: eps must be >= 0");
  const double a = 0.5 * h, c = 4.0 * eps * eps;
  static gsl_integration_glfixed_table* tab = gsl_integration_glfixed_table_alloc(96);
  double s = 0.0;
  for (std::size_t k = 0; k < 96; ++k) {
    double th = 0.0, w = 0.0;
    gsl_integration_glfixed_point(0.0, kPi / 4.0, k, &th, &w, tab);
    const double R = a / std::cos(th);
    const double X = R * R / c;
    s += w * 0.5 * c * (X * expint_e1(X) + 1.0 - std::exp(-X));
  }
  const double avg_e1 = 8.0 * s / (h * h);
  return g0 - avg_e1 / (4.0 * kPi);
}

double grid_kernel(double eps, double h, int di, int dj) {
  if (di == 0 && dj == 0) return green_cell_average(eps, h);
  const double x = di * h, y = dj * h;
  return eps == 0.0 ? green(x, y) : green_reg(eps, x, y);
}

double PotentialField::max_gradient() const {
  double m = 0.0;
  for (std::size_t k = 0; k < gx.size(); ++k) m = std::max(m, std::hypot(gx[k], gy[k]));
  return m;
}

struct KernelOperator::Impl {
  int N = 0;  // padded size
  std::vector<std::complex<double>> khat, kxhat, kyhat;
  double* real_buf = nullptr;
  fftw_complex* spec_buf = nullptr;
  fftw_plan fwd = nullptr, bwd = nullptr;
  mutable std::mutex mu;

  ~Impl() {
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    fftw_free(real_buf);
    fftw_free(spec_buf);
  }
};

static std::mutex g_plan_mutex;

KernelOperator::KernelOperator(const GridSpec& spec, double eps)
    : spec_(spec), eps_(eps), impl_(std::make_unique<Impl>()) {
  if (eps < 0.0) throw std::invalid_argument("kernel: eps must be >= 0");
  const int n = spec.n, N = 2 * n;
  impl_->N = N;
  const std::size_t nr = static_cast<std::size_t>(N) * N;
  const std::size_t nc = static_cast<std::size_t>(N) * (N / 2 + 1);
  {
    std::lock_guard<std::mutex> lk(g_plan_mutex);
    impl_->real_buf = fftw_alloc_real(nr);
    impl_->spec_buf = fftw_alloc_complex(nc);
    impl_->fwd = fftw_plan_dft_r2c_2d(N, N, impl_->real_buf, impl_->spec_buf, FFTW_ESTIMATE);
    impl_->bwd = fftw_plan_dft_c2r_2d(N, N, impl_->spec_buf, impl_->real_buf, FFTW_ESTIMATE);
  }
  const double h = spec.h();
  auto transform = [&](auto&& fill, std::vector<std::complex<double>>& out) {
    std::fill(impl_->real_buf, impl_->real_buf + nr, 0.0);
    for (int di = -(n - 1); di <= n - 1; ++di)
      for (int dj = -(n - 1); dj <= n - 1; ++dj) {
        const int a = (di + N) % N, b = (dj + N) % N;
        impl_->real_buf[static_cast<std::size_t>(a) * N + b] = fill(di, dj);
      }
    fftw_execute(impl_->fwd);
    out.resize(nc);
    for (std::size_t k = 0; k < nc; ++k)
      out[k] = {impl_->spec_buf[k][0], impl_->spec_buf[k][1]};
  };
  transform([&](int di, int dj) { return grid_kernel(eps, h, di, dj); }, impl_->khat);
  auto grad = [&](int di, int dj, int comp) {
    if (di == 0 && dj == 0) return 0.0;
    const double x = di * h, y = dj * h, r = std::hypot(x, y);
    return green_reg_radial_derivative(eps, r) * (comp == 0 ? x : y) / r;
  };
  transform([&](int di, int dj) { return grad(di, dj, 0); }, impl_->kxhat);
  transform([&](int di, int dj) { return grad(di, dj, 1); }, impl_->kyhat);
}

KernelOperator::~KernelOperator() = default;

void KernelOperator::convolve(const std::vector<std::complex<double>>& khat,
                              const std::vector<double>& f, std::vector<double>& out) const {
  const int n = spec_.n, N = impl_->N;
  const std::size_t nr = static_cast<std::size_t>(N) * N;
  const std::size_t nc = static_cast<std::size_t>(N) * (N / 2 + 1);
  std::lock_guard<std::mutex> lk(impl_->mu);
  double* rb = impl_->real_buf;
  std::fill(rb, rb + nr, 0.0);
  for (int i = 0; i < n; ++i)
    std::memcpy(rb + static_cast<std::size_t>(i) * N, f.data() + static_cast<std::size_t>(i) * n,
                sizeof(double) * n);
  fftw_execute_dft_r2c(impl_->fwd, rb, impl_->spec_buf);
  for (std::size_t k = 0; k < nc; ++k) {
    const std::complex<double> z(impl_->spec_buf[k][0], impl_->spec_buf[k][1]);
    const std::complex<double> p = z * khat[k];
    impl_->spec_buf[k][0] = p.real();
    impl_->spec_buf[k][1] = p.imag();
  }
  fftw_execute_dft_c2r(impl_->bwd, impl_->spec_buf, rb);
  const double scale = spec_.cell_area() / static_cast<double>(nr);
  out.resize(spec_.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(i) * n + j] = rb[static_cast<std::size_t>(i) * N + j] * scale;
}

void KernelOperator::apply(const std::vector<double>& f, std::vector<double>& out) const {
  convolve(impl_->khat, f, out);
}

void KernelOperator::apply_gradient(const std::vector<double>& f, std::vector<double>& gx,
                                    std::vector<double>& gy) const {
  convolve(impl_->kxhat, f, gx);
  convolve(impl_->kyhat, f, gy);
}

std::shared_ptr<const KernelOperator> KernelOperator::get(const GridSpec& spec, double eps) {
  static std::mutex mu;
  static std::map<std::tuple<int, double, double>, std::shared_ptr<const KernelOperator>> cache;
  std::lock_guard<std::mutex> lk(mu);
  auto key = std::make_tuple(spec.n, spec.L, eps);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  if (cache.size() > 16) cache.clear();
  auto op = std::make_shared<const KernelOperator>(spec, eps);
  cache.emplace(key, op);
  return op;
}

PotentialField potential(const Density& rho, double eps) {
  auto op = KernelOperator::get(rho.spec(), eps);
  PotentialField pf;
  pf.spec = rho.spec();
  op->apply(rho.values(), pf.c);
  op->apply_gradient(rho.values(), pf.gx, pf.gy);
  return pf;
}

std::vector<double> potential_values(const Density& rho, double eps) {
  std::vector<double> c;
  KernelOperator::get(rho.spec(), eps)->apply(rho.values(), c);
  return c;
}

}  // namespace pks
