#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace pks {

using Vec2 = std::array<double, 2>;

struct GridSpec {
  int n = 0;
  double L = 0.0;

  GridSpec() = default;
  GridSpec(int n_, double L_);

  double h() const { return 2.0 * L / n; }
  double cell_area() const { return h() * h(); }
  double center(int i) const { return (i + 0.5) * h() - L; }
  std::size_t size() const { return static_cast<std::size_t>(n) * n; }
  // row-major: i indexes x, j indexes y
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n + j; }
  bool operator==(const GridSpec& o) const { return n == o.n && L == o.L; }
};

class Density {
 public:
  Density() = default;
  explicit Density(GridSpec spec);
  Density(GridSpec spec, std::vector<double> values);

  const GridSpec& spec() const { return spec_; }
  const std::vector<double>& values() const { return v_; }
  double operator[](std::size_t k) const { return v_[k]; }
  double at(int i, int j) const { return v_[spec_.index(i, j)]; }
  double mass() const { return mass_; }
  std::size_t size() const { return v_.size(); }

  // Replaces the values and refreshes the cached mass.
  void assign(std::vector<double> values);
  void scale_to_mass(double M);

 private:
  void validate_and_cache();

  GridSpec spec_;
  std::vector<double> v_;
  double mass_ = 0.0;
};

struct SteadyStateParams {
  double lambda = 1.0;
  double M = 0.0;
};

double steady_state_value(const SteadyStateParams& p, double x, double y);
Density steady_state(const SteadyStateParams& p, Vec2 offset, const GridSpec& spec);

// Mass of the centered profile outside the box [-L,L]^2.
double steady_state_box_tail(const SteadyStateParams& p, double L);
// Mass of the centered profile over {|x|^2 >= lambda s^2}.
double steady_state_disk_tail(const SteadyStateParams& p, double s);

double mass(const Density& rho);
double moment(const Density& rho, double q);
double lp_norm(const Density& rho, double p);
// Includes the far-field extrapolation of the integrand off the box.
double grad_quarter_energy(const Density& rho);
// Integral over the complement of the box of c |x|^{-4}, with c fitted on the edge cells.
double far_field_tail(const GridSpec& g, const std::vector<double>& integrand);
// Integral of rho over {|x|^2 >= r2}.
double tail_mass(const Density& rho, double r2);
double l1_distance(const Density& a, const Density& b);

// Fourth-order centered differences in the interior, second order within two cells of the edge.
void grid_gradient(const GridSpec& spec, const std::vector<double>& f, std::vector<double>& gx,
                   std::vector<double>& gy);

void write_grid(std::ostream& os, const Density& rho);
Density read_grid(std::istream& is);
void write_grid_file(const std::string& path, const Density& rho);
Density read_grid_file(const std::string& path);

}  // namespace pks
