#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "pks/grid.hpp"

namespace pks {

struct OTSolverConfig {
  enum class Method { Entropic, ExactSmall };
  Method method = Method::Entropic;
  double sinkhorn_epsilon = 0.0;  // length^2; 0 means 2 h^2 on grids
  int max_iters = 20000;
  double marginal_tol = 1e-9;
  bool debias = true;
  bool eps_scaling = true;
};

struct PlanEntry {
  std::size_t i = 0;
  std::size_t j = 0;
  double mass = 0.0;
};

struct TransportResult {
  double p = 2.0;
  double cost = 0.0;      // W_p with the mass-M normalization
  double raw_value = 0.0; // normalized entropic or exact transport value before debiasing
  double mass = 0.0;
  std::vector<PlanEntry> plan;  // exact solver: plan over cells of rho x sigma
  std::vector<double> f, g;     // entropic grid solver: dual potentials
  std::vector<Vec2> map;        // barycentric projection per cell of rho
  double marginal_residual = 0.0;
  int iterations = 0;
  double epsilon = 0.0;
};

class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& msg, double residual)
      : std::runtime_error(msg), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// --- discrete measures ---------------------------------------------------

struct PointMeasure {
  std::vector<Vec2> x;
  std::vector<double> w;
};

struct DiscreteOTResult {
  double value = 0.0;  // sum pi_ij |x_i - y_j|^p (exact) or entropic objective
  std::vector<PlanEntry> plan;
  std::vector<double> f, g;
  double marginal_residual = 0.0;
  int iterations = 0;
};

// Exact transport between probability vectors via successive shortest paths.
DiscreteOTResult exact_ot(const PointMeasure& a, const PointMeasure& b, double p);

// Log-domain Sinkhorn with KL(pi | a x b) regularization and optional eps-scaling.
DiscreteOTResult sinkhorn_points(const PointMeasure& a, const PointMeasure& b, double p, double eps,
                                 int max_iters, double tol, bool eps_scaling);
double sinkhorn_divergence_points(const PointMeasure& a, const PointMeasure& b, double p,
                                  double eps, int max_iters, double tol);

// --- grids ---------------------------------------------------------------

struct SinkhornStats {
  int iterations = 0;
  int newton_steps = 0;
  int cg_iterations = 0;
  double marginal_residual = 0.0;
  double value = 0.0;
  bool converged = false;
};

// Entropic transport with quadratic cost on a single grid, using the separable Gibbs kernel.
// Potentials f, g are in length^2 units; measures are probability vectors over cells.
class GridSinkhorn {
 public:
  GridSinkhorn(const GridSpec& spec, double eps);

  const GridSpec& spec() const { return spec_; }
  double eps() const { return eps_; }

  SinkhornStats solve(const std::vector<double>& a, const std::vector<double>& b,
                      std::vector<double>& f, std::vector<double>& g, double tol, int max_iters,
                      bool eps_scaling) const;
  // Self-transport OT_eps(a, a); f is the symmetric potential.
  SinkhornStats solve_symmetric(const std::vector<double>& a, std::vector<double>& f, double tol,
                                int max_iters) const;
  std::vector<Vec2> barycentric_map(const std::vector<double>& b, const std::vector<double>& f,
                                    const std::vector<double>& g) const;

  // out_i = -eps * LSE_j(lw_j + h_j/eps - |x_i - x_j|^2/eps) at regularization e.
  void c_transform(const std::vector<double>& h, const std::vector<double>& lw, double e,
                   std::vector<double>& out) const;

 private:
  void lse_pass(std::vector<double>& A, double e, int band = -1) const;
  int band_of(const std::vector<double>& A, double e) const;
  // out_i = sum_j exp(F_i + G_j - |x_i - x_j|^2/e) v_j
  void plan_apply(const std::vector<double>& F, const std::vector<double>& G, double e, int band,
                  const std::vector<double>& v, std::vector<double>& out) const;

  GridSpec spec_;
  double eps_;
};

std::vector<double> normalized_weights(const Density& rho);
double grid_diameter(const GridSpec& spec);

TransportResult wasserstein(const Density& rho, const Density& sigma, double p,
                            const OTSolverConfig& cfg);

struct OrderingResult {
  double wp = 0.0;
  double w2 = 0.0;
  bool holds = false;
};
OrderingResult ordering_check(const Density& rho, const Density& sigma, double p,
                              const OTSolverConfig& cfg, double rel_tol = 1e-2);

struct InterpolationResult {
  Density rho;
  double parked_mass = 0.0;  // mass whose image fell outside the box
};
InterpolationResult push_along_map(const Density& rho, const std::vector<Vec2>& map, double t);
InterpolationResult displacement_interpolation(const Density& rho, const Density& sigma, double t,
                                               const OTSolverConfig& cfg);

double pushforward_check(const Density& rho, const std::vector<Vec2>& map, const Density& sigma);

}  // namespace pks
