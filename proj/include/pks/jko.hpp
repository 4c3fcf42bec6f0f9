#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pks/functionals.hpp"
#include "pks/grid.hpp"
#include "pks/transport.hpp"

namespace pks {

struct SchemeConfig {
  double tau = 0.0;
  double lambda = 1.0;
  double mass = 0.0;
  double c_rho0 = 0.0;
  double h0 = 0.0;  // H_lambda[rho0]
  double f0 = 0.0;  // F_PKS[rho0]

  // schedule constants
  double q0 = 0.0;
  double big_lambda = 0.0;
  double tau_star = 0.0;
  double A = 0.0;
  double gamma2 = 0.0;
  double log_c_ccd = 0.0;
  double log_z = 0.0;  // eps_k = Z tau^{10/3} 4^{-k}
  double log_c3 = 0.0;
  double log_z_tilde = 0.0;
  double z_tilde_c3 = 0.0;
  double f_bar0 = 0.0;
  double f_bar1 = 0.0;
  double f_bar2 = 0.0;

  // inner solver
  double sinkhorn_epsilon = 0.0;  // length^2; 0 means 2 h^2
  bool debias = true;             // Sinkhorn divergence in place of the raw entropic cost
  double inner_tol = 1e-10;       // relative objective change between outer iterations
  double marginal_tol = 1e-12;    // L1 marginal residual of the inner transport solves
  int max_outer = 500;
  int max_inner = 1000;

  int max_steps = 200;
  double l1_target = 0.0;  // stop once ||rho - varrho_lambda||_1 falls below this

  double log_eps_k(int k) const;
  double eps_k(int k) const;
  double sinkhorn_eps(const GridSpec& g) const;
};

// Derives the step-size and regularization schedule; tau defaults to tau*/2.
// c_rho0 <= 0 selects 2 H_lambda[rho0] + 1.
SchemeConfig schedule(double lambda, const Density& rho0, double c_rho0 = 0.0);
// Recomputes the tau-dependent constants (Z tilde, F bars) after tau changes.
void refresh_schedule(SchemeConfig& cfg);
// Throws std::invalid_argument unless 0 < tau < tau*.
void validate_step_size(const SchemeConfig& cfg);

// C_gamma(eps) as a function of log eps, with ||G_eps - G||_2 <= eps (2 ||gamma||_2 + 4 sqrt(5 pi) |log 2 eps|).
double regularization_error_constant(double log_eps);

struct StepSolverInfo {
  int outer_iterations = 0;
  int inner_iterations = 0;
  int symmetric_iterations = 0;
  double marginal_residual = 0.0;
  double symmetric_residual = 0.0;
  double objective_prev = 0.0;  // objective at rho_prev, equal to F^{eps_k}[rho_prev]
  double objective = 0.0;
  double transport_value = 0.0;  // normalized divergence S(p, q)
  double seconds = 0.0;
};

struct JkoStep {
  Density rho;
  StepSolverInfo info;
  double w2_sq = 0.0;      // M S(p, q)
  std::vector<Vec2> map;   // approximate optimal map from rho to rho_prev
};

class JkoError : public std::runtime_error {
 public:
  JkoError(const std::string& msg, Density last, double residual)
      : std::runtime_error(msg), last_(std::move(last)), residual_(residual) {}
  const Density& last_iterate() const { return last_; }
  double residual() const { return residual_; }

 private:
  Density last_;
  double residual_;
};

// Potentials carried between steps.
struct WarmStart {
  std::vector<double> f_sym;  // symmetric potential of the previous output
};

JkoStep jko_step(const Density& rho_prev, double tau, double eps_k, const SchemeConfig& cfg,
                 WarmStart* warm = nullptr);

// Objective of one step in the free-field parametrization rho = M softmax(u) / h^2.
class JkoObjective {
 public:
  JkoObjective(const Density& rho_prev, double tau, double eps_k, const SchemeConfig& cfg);

  double value(const std::vector<double>& u, std::vector<double>* grad = nullptr);
  Density density(const std::vector<double>& u) const;
  std::vector<double> field(const Density& rho) const;
  double transport_tol = 1e-11;

 private:
  Density prev_;
  std::vector<double> q_;
  double tau_, eps_k_, eta_, M_;
  bool debias_;
  double self_q_ = 0.0;
  std::vector<double> f_warm_, g_warm_, s_warm_;
};

double el_residual(const Density& rho, const std::vector<Vec2>& map, double tau, double eps_k);
double el_residual(const Density& rho, const Density& rho_prev, double tau, double eps_k,
                   const SchemeConfig& cfg);

struct StepRecord {
  int k = 0;
  double tau = 0.0;
  double eps_k = 0.0;
  FunctionalReport before;
  FunctionalReport after;
  double h_before = 0.0;  // H_lambda including the far-field part
  double h_after = 0.0;
  double free_energy_prev_eps = 0.0;  // F^{eps_{k-1}}[rho^{k-1}]
  double w2_step = 0.0;
  double w2_bound = 0.0;  // F2bar sqrt(tau)
  double el_residual = 0.0;
  double h_dissipation_slack = 0.0;
  double f_monotonicity_slack = 0.0;
  double step_size_slack = 0.0;  // 2 tau (F[prev] - F[next]) - W2^2
  double budget = 0.0;
  double l1_to_steady = 0.0;
  std::map<double, double> lp_snapshot;
  StepSolverInfo solver;
};

// Grid bias of the dissipation at the steady state, used in the tolerance budget.
double dissipation_bias(const GridSpec& g, double lambda, double M);
double tolerance_budget(const SchemeConfig& cfg, const GridSpec& g, double marginal_residual,
                        double dissipation_bias);

StepRecord step_diagnostics(const Density& prev, const JkoStep& step, double tau, double eps_k,
                            int k, const SchemeConfig& cfg, double dissipation_bias);

struct Trajectory {
  SchemeConfig config;
  std::vector<Density> knots;  // knots[k] = rho^k
  std::vector<StepRecord> records;
  bool completed = false;
  std::string failure;

  // rho_tau(t) = rho^k for t in ((k-1) tau, k tau]
  const Density& piecewise_constant(double t) const;
  // displacement interpolation between consecutive knots
  Density lipschitz(double t, const OTSolverConfig& ot) const;
};

struct RunOptions {
  std::string checkpoint_dir;  // empty disables checkpoints
  bool resume = false;
  std::function<void(const StepRecord&, const Density&)> on_step;
};

Trajectory run(const Density& rho0, const SchemeConfig& cfg, const RunOptions& opts = {});

// Checkpoint files: step_NNNNN.grid, step_NNNNN.meta and step_NNNNN.warm.
std::string checkpoint_stem(const std::string& dir, int k);
int latest_checkpoint(const std::string& dir);

// Test functions for the weak form.
struct TestFunction {
  enum class Kind { Coordinate, TruncatedSquare, Bump };
  Kind kind = Kind::Coordinate;
  int axis = 0;             // Coordinate
  double radius = 1.0;      // TruncatedSquare: psi = |x|^2 for |x| <= radius; Bump: support radius
  Vec2 center{0.0, 0.0};    // Bump

  double value(double x, double y) const;
  Vec2 gradient(double x, double y) const;
  double laplacian(double x, double y) const;
};

// int Delta psi rho - (1/4 pi) sum over pairs of rho (grad psi(x) - grad psi(y)).(x-y)/|x-y|^2 rho
double weak_form_rate(const Density& rho, const TestFunction& psi);

}  // namespace pks
