#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "pks/grid.hpp"

namespace pks {

double expint_e1(double x);

double mollifier(double eps, double x, double y);
double green(double x, double y);
double green_reg(double eps, double x, double y);
// d/dr of G_eps at radius r (eps = 0 gives the log kernel).
double green_reg_radial_derivative(double eps, double r);
// G_eps(0) * eps^2, the measured constant in G_eps <= C eps^-2.
double green_reg_bound_constant(double eps);

// Average of the log kernel (eps = 0) or of G_eps over the square cell [-h/2,h/2]^2.
double green_cell_average(double eps, double h);

// Discrete kernel used on the grid: point values off the diagonal, cell averages on it.
double grid_kernel(double eps, double h, int di, int dj);

struct PotentialField {
  GridSpec spec;
  std::vector<double> c;
  std::vector<double> gx;
  std::vector<double> gy;
  double max_gradient() const;
};

// Zero-padded FFT convolution against the grid kernel, cached per (grid, eps).
class KernelOperator {
 public:
  KernelOperator(const GridSpec& spec, double eps);
  ~KernelOperator();
  KernelOperator(const KernelOperator&) = delete;
  KernelOperator& operator=(const KernelOperator&) = delete;

  const GridSpec& spec() const { return spec_; }
  double eps() const { return eps_; }
  // out_k = h^2 sum_j K(x_k - x_j) f_j
  void apply(const std::vector<double>& f, std::vector<double>& out) const;
  void apply_gradient(const std::vector<double>& f, std::vector<double>& gx,
                      std::vector<double>& gy) const;

  static std::shared_ptr<const KernelOperator> get(const GridSpec& spec, double eps);

 private:
  struct Impl;
  void convolve(const std::vector<std::complex<double>>& khat, const std::vector<double>& f,
                std::vector<double>& out) const;

  GridSpec spec_;
  double eps_;
  std::unique_ptr<Impl> impl_;
};

PotentialField potential(const Density& rho, double eps);
std::vector<double> potential_values(const Density& rho, double eps);

}  // namespace pks
