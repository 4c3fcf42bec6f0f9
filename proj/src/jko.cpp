#include "pks/jko.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <regex>
#include <sstream>

#include "pks/constants.hpp"
#include "pks/inequalities.hpp"
#include "pks/kernels.hpp"

namespace pks {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDensityFloor = 1e-30;

double h_total(const Density& rho, double lambda) {
  const HLambdaValue hv = h_lambda_full(rho, lambda);
  return hv.value + hv.tail;
}

double log_add_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

std::vector<double> probabilities(const Density& rho) {
  const double w = rho.spec().cell_area() / rho.mass();
  const double floor = kDensityFloor * w;
  std::vector<double> p(rho.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::max(rho[k] * w, floor);
  return p;
}

Density density_from(const GridSpec& g, double M, const std::vector<double>& p) {
  std::vector<double> v(p.size());
  const double s = M / g.cell_area();
  for (std::size_t k = 0; k < p.size(); ++k) v[k] = s * p[k];
  return Density(g, std::move(v));
}

// F on rho = M p / h^2 given the potential c of rho.
double free_energy_of(const std::vector<double>& p, const std::vector<double>& c, double M,
                      double h2) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] > 0.0) s += p[k] * (std::log(M * p[k] / h2) - 0.5 * c[k]);
  return M * s;
}

std::vector<Vec2> debiased_map(const GridSinkhorn& sk, const std::vector<double>& p,
                               const std::vector<double>& q, const std::vector<double>& f,
                               const std::vector<double>& g, const std::vector<double>& fsym) {
  std::vector<Vec2> map = sk.barycentric_map(q, f, g);
  const std::vector<Vec2> self = sk.barycentric_map(p, fsym, fsym);
  const GridSpec& s = sk.spec();
  for (int i = 0; i < s.n; ++i)
    for (int j = 0; j < s.n; ++j) {
      const std::size_t k = s.index(i, j);
      map[k][0] += s.center(i) - self[k][0];
      map[k][1] += s.center(j) - self[k][1];
    }
  return map;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace

// --- schedule ---------------------------------------------------------------

double SchemeConfig::log_eps_k(int k) const {
  return log_z + (10.0 / 3.0) * std::log(tau) - k * std::log(4.0);
}

double SchemeConfig::eps_k(int k) const { return std::exp(log_eps_k(k)); }

double SchemeConfig::sinkhorn_eps(const GridSpec& g) const {
  return sinkhorn_epsilon > 0.0 ? sinkhorn_epsilon : 2.0 * g.cell_area();
}

double regularization_error_constant(double log_eps) {
  return std::sqrt(8.0 * kPi) * (2.0 * constants::gamma_norm_2() +
                                 4.0 * std::sqrt(5.0 * kPi) * std::abs(std::log(2.0) + log_eps));
}

void refresh_schedule(SchemeConfig& c) {
  const double tau0 = std::min(c.q0 / (2.0 * c.A * constants::gamma_norm_43()), 1.0);
  const double log_pc = std::log(kPi * c.c_rho0);
  const double log_b = std::log(8.0) + std::log(kPi) / 3.0 + std::log(c.A) -
                       (2.0 / 3.0) * std::log(c.gamma2) +
                       (2.0 / 3.0) * log_add_exp(log_pc, c.log_c_ccd);
  c.log_z = 2.0 * (std::log(c.q0 / 4.0) - log_b);
  c.log_c3 = std::log(8.0 / c.gamma2) + log_add_exp(log_pc, std::log(tau0) + c.log_c_ccd);
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= std::max(c.max_steps, 1); ++k) {
    const double v = std::log(regularization_error_constant(c.log_eps_k(k))) + c.log_z +
                     std::log(c.tau) / 3.0 - k * std::log(2.0);
    best = std::max(best, v);
  }
  c.log_z_tilde = best;
  c.z_tilde_c3 = std::exp(c.log_z_tilde + c.log_c3);
  c.f_bar1 = c.z_tilde_c3;
  const double sq = 2.0 * c.f_bar0 + 2.0 * c.f_bar1 - 2.0 * constants::critical_free_energy() +
                    2.0 * c.z_tilde_c3;
  c.f_bar2 = std::sqrt(std::max(sq, 0.0));
}

SchemeConfig schedule(double lambda, const Density& rho0, double c_rho0) {
  if (!(lambda > 0.0)) throw std::invalid_argument("schedule: lambda must be positive");
  if (!is_critical_mass(rho0.mass()))
    throw std::invalid_argument("schedule: initial mass must be 8 pi");
  SchemeConfig c;
  c.lambda = lambda;
  c.mass = rho0.mass();
  c.h0 = h_total(rho0, lambda);
  c.f0 = free_energy(rho0, 0.0);
  if (!std::isfinite(c.f0) || !std::isfinite(c.h0))
    throw std::invalid_argument("schedule: initial free energy not finite");
  c.c_rho0 = c_rho0 > 0.0 ? c_rho0 : 2.0 * c.h0 + 1.0;
  c.q0 = c.c_rho0 - c.h0;
  if (!(c.q0 > 0.0))
    throw std::invalid_argument("schedule: initial slack violated (H_lambda[rho0] >= C_rho0)");
  c.big_lambda = constants::big_lambda();
  c.A = 32.0 * kPi / std::sqrt(2.0 * lambda) * constants::c_hls() * constants::x_gamma_norm_43();
  c.tau_star =
      std::min(c.big_lambda * c.q0 / (2.0 * c.A * constants::gamma_norm_43()), 1.0);
  c.gamma2 = 2.0 * kPi;
  const CcfConstants ccf = ccf_constants(lambda, c.c_rho0);
  c.log_c_ccd = ccd_constants((c.f0 + ccf.c_ccf) / ccf.gamma1, c.gamma2).log_c_ccd;
  c.f_bar0 = entropy(rho0) + 32.0 * kPi + 2.0 * log_weighted_l1(rho0);
  c.tau = 0.5 * c.tau_star;
  refresh_schedule(c);
  return c;
}

void validate_step_size(const SchemeConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(cfg.tau < cfg.tau_star))
    throw std::invalid_argument("tau must be below tau* = min(Lambda Q0 / (2 A ||gamma||_{4/3}), 1)");
}

// --- one step ---------------------------------------------------------------

JkoStep jko_step(const Density& rho_prev, double tau, double eps_k, const SchemeConfig& cfg,
                 WarmStart* warm) {
  const auto t_start = std::chrono::steady_clock::now();
  if (!(tau > 0.0)) throw std::invalid_argument("jko_step: tau must be positive");
  const GridSpec& g = rho_prev.spec();
  const std::size_t N = g.size();
  const double M = rho_prev.mass(), h2 = g.cell_area();
  const double eta = cfg.sinkhorn_eps(g);
  const double gam = 2.0 * tau / eta;
  const double log_floor = std::log(kDensityFloor * h2 / M);
  const GridSinkhorn sk(g, eta);
  const auto kernel = KernelOperator::get(g, eps_k);

  const std::vector<double> q = probabilities(rho_prev);
  std::vector<double> logq(N), zeros(N, 0.0);
  for (std::size_t k = 0; k < N; ++k) logq[k] = std::log(q[k]);

  StepSolverInfo info;
  std::vector<double> fq;
  if (warm && warm->f_sym.size() == N) fq = warm->f_sym;
  const SinkhornStats sq = sk.solve_symmetric(q, fq, cfg.marginal_tol, 5000);
  info.symmetric_iterations += sq.iterations;
  const double self_q = sq.value;

  struct State {
    std::vector<double> p, logp, alpha, beta, f, g, fsym;
    double cross = 0.0, self = 0.0, J = 0.0, S = 0.0;
  };
  State cur;
  cur.p = q;
  cur.logp = logq;
  cur.alpha.resize(N);
  for (std::size_t k = 0; k < N; ++k) cur.alpha[k] = fq[k] + eta * logq[k];
  cur.beta = cur.alpha;
  cur.f = fq;
  cur.g = fq;
  cur.fsym = fq;
  cur.cross = self_q;
  cur.self = self_q;

  auto divergence = [&](const State& s) {
    return cfg.debias ? s.cross - 0.5 * s.self - 0.5 * self_q : s.cross;
  };

  State best;
  std::vector<double> c, W(N), Lb(N), tmp;
  double J0 = 0.0;
  for (int t = 0;; ++t) {
    kernel->apply(density_from(g, M, cur.p).values(), c);
    if (t > 0 && cfg.debias) {
      const SinkhornStats ss = sk.solve_symmetric(cur.p, cur.fsym, cfg.marginal_tol, 5000);
      info.symmetric_iterations += ss.iterations;
      info.symmetric_residual = ss.marginal_residual;
      cur.self = ss.value;
    }
    cur.S = divergence(cur);
    cur.J = M / (2.0 * tau) * cur.S + free_energy_of(cur.p, c, M, h2);
    if (t == 0) {
      J0 = cur.J;
      info.objective_prev = J0;
    } else {
      const double scale = std::max(1.0, std::abs(best.J));
      if (cur.J > best.J) {
        // round-off floor reached; keep the better iterate
        if (cur.J - best.J > 1e-9 * scale)
          throw JkoError("jko_step: majorization step increased the objective",
                         density_from(g, M, cur.p), cur.J - best.J);
        cur = std::move(best);
        break;
      }
      if (best.J - cur.J <= cfg.inner_tol * scale) break;
    }
    if (t >= cfg.max_outer)
      throw JkoError("jko_step: outer iterations exhausted", density_from(g, M, cur.p),
                     t > 0 ? best.J - cur.J : 0.0);
    best = cur;
    info.outer_iterations = t + 1;

    for (std::size_t k = 0; k < N; ++k) {
      const double lin = cfg.debias ? cur.fsym[k] : 0.0;
      W[k] = -2.0 * tau * c[k] - lin - eta * (cur.logp[k] + 1.0);
    }

    double res = std::numeric_limits<double>::infinity();
    for (int it = 0;; ++it) {
      sk.c_transform(cur.beta, zeros, eta, tmp);
      for (std::size_t k = 0; k < N; ++k) Lb[k] = -tmp[k] / eta;
      if (it > 0) {
        res = 0.0;
        for (std::size_t k = 0; k < N; ++k)
          res += std::abs(std::exp(cur.alpha[k] / eta + Lb[k]) - cur.p[k]);
        if (res < cfg.marginal_tol) break;
      }
      if (it >= cfg.max_inner)
        throw JkoError("jko_step: inner transport solve did not converge",
                       density_from(g, M, cur.p), res);
      for (std::size_t k = 0; k < N; ++k) {
        const double lp = std::max((Lb[k] - gam - W[k] / eta) / (1.0 + gam), log_floor);
        cur.logp[k] = lp;
        cur.p[k] = std::exp(lp);
        cur.alpha[k] = eta * (lp - Lb[k]);
      }
      sk.c_transform(cur.alpha, zeros, eta, tmp);
      for (std::size_t k = 0; k < N; ++k) cur.beta[k] = eta * logq[k] + tmp[k];
      ++info.inner_iterations;
    }
    info.marginal_residual = res;

    // the row marginal of the Gibbs plan makes (alpha, beta) exact potentials
    double cross = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      cur.logp[k] = cur.alpha[k] / eta + Lb[k];
      cur.p[k] = std::exp(cur.logp[k]);
      cur.f[k] = -eta * Lb[k];
      cur.g[k] = cur.beta[k] - eta * logq[k];
      cross += cur.p[k] * cur.f[k] + q[k] * cur.g[k];
    }
    cur.cross = cross;
  }

  if (!cfg.debias) {
    const SinkhornStats ss = sk.solve_symmetric(cur.p, cur.fsym, cfg.marginal_tol, 5000);
    info.symmetric_iterations += ss.iterations;
    info.symmetric_residual = ss.marginal_residual;
    cur.self = ss.value;
  }
  if (cur.J > J0 + 1e-12 * std::max(1.0, std::abs(J0)))
    throw std::logic_error("jko_step: objective above its value at rho_prev");

  JkoStep out;
  out.rho = density_from(g, M, cur.p);
  info.objective = cur.J;
  info.transport_value = cur.cross - 0.5 * cur.self - 0.5 * self_q;
  out.w2_sq = std::max(0.0, M * info.transport_value);
  out.map = debiased_map(sk, cur.p, q, cur.f, cur.g, cur.fsym);
  if (warm) warm->f_sym = cur.fsym;
  info.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  out.info = info;
  return out;
}

// --- objective in the free-field parametrization ---------------------------

JkoObjective::JkoObjective(const Density& rho_prev, double tau, double eps_k,
                           const SchemeConfig& cfg)
    : prev_(rho_prev),
      q_(probabilities(rho_prev)),
      tau_(tau),
      eps_k_(eps_k),
      eta_(cfg.sinkhorn_eps(rho_prev.spec())),
      M_(rho_prev.mass()),
      debias_(cfg.debias) {
  const GridSinkhorn sk(prev_.spec(), eta_);
  self_q_ = sk.solve_symmetric(q_, s_warm_, 1e-14, 100000).value;
  s_warm_.clear();
}

Density JkoObjective::density(const std::vector<double>& u) const {
  const double mx = *std::max_element(u.begin(), u.end());
  std::vector<double> p(u.size());
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += p[k] = std::exp(u[k] - mx);
  for (double& v : p) v /= s;
  return density_from(prev_.spec(), M_, p);
}

std::vector<double> JkoObjective::field(const Density& rho) const {
  std::vector<double> u = probabilities(rho);
  for (double& v : u) v = std::log(v);
  return u;
}

double JkoObjective::value(const std::vector<double>& u, std::vector<double>* grad) {
  const GridSpec& g = prev_.spec();
  const std::size_t N = g.size();
  const double h2 = g.cell_area();
  const Density rho = density(u);
  std::vector<double> p(N);
  for (std::size_t k = 0; k < N; ++k) p[k] = rho[k] * h2 / M_;
  const std::vector<double> c = potential_values(rho, eps_k_);
  const GridSinkhorn sk(g, eta_);
  const bool cold = f_warm_.size() != N;
  const SinkhornStats cs = sk.solve(p, q_, f_warm_, g_warm_, transport_tol, 100000, cold);
  double S = cs.value;
  if (debias_) {
    const SinkhornStats ss = sk.solve_symmetric(p, s_warm_, transport_tol, 100000);
    S -= 0.5 * ss.value + 0.5 * self_q_;
  }
  const double J = M_ / (2.0 * tau_) * S + free_energy_of(p, c, M_, h2);
  if (grad) {
    std::vector<double> gp(N);
    double mean = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      const double ot = f_warm_[k] - (debias_ ? s_warm_[k] : 0.0);
      gp[k] = M_ / (2.0 * tau_) * ot + M_ * (std::log(rho[k]) + 1.0 - c[k]);
      mean += p[k] * gp[k];
    }
    grad->resize(N);
    for (std::size_t k = 0; k < N; ++k) (*grad)[k] = p[k] * (gp[k] - mean);
  }
  return J;
}

// --- Euler-Lagrange residual -------------------------------------------------

double el_residual(const Density& rho, const std::vector<Vec2>& map, double tau, double eps_k) {
  const GridSpec& g = rho.spec();
  const std::size_t N = g.size();
  if (map.size() != N) throw std::invalid_argument("el_residual: map size mismatch");
  const PotentialField pf = potential(rho, eps_k);
  std::vector<double> lr(N), lx, ly;
  for (std::size_t k = 0; k < N; ++k) lr[k] = std::log(std::max(rho[k], kDensityFloor));
  grid_gradient(g, lr, lx, ly);
  double s = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const std::size_t k = g.index(i, j);
      if (!(rho[k] > kDensityFloor)) continue;
      const double vx = -lx[k] + pf.gx[k] - (g.center(i) - map[k][0]) / tau;
      const double vy = -ly[k] + pf.gy[k] - (g.center(j) - map[k][1]) / tau;
      s += rho[k] * (vx * vx + vy * vy);
    }
  return std::sqrt(s * g.cell_area() / rho.mass());
}

double el_residual(const Density& rho, const Density& rho_prev, double tau, double eps_k,
                   const SchemeConfig& cfg) {
  const GridSpec& g = rho.spec();
  const GridSinkhorn sk(g, cfg.sinkhorn_eps(g));
  const std::vector<double> p = probabilities(rho), q = probabilities(rho_prev);
  std::vector<double> f, gg, fsym;
  sk.solve(p, q, f, gg, cfg.marginal_tol, 20000, true);
  std::vector<Vec2> map;
  if (cfg.debias) {
    sk.solve_symmetric(p, fsym, cfg.marginal_tol, 5000);
    map = debiased_map(sk, p, q, f, gg, fsym);
  } else {
    map = sk.barycentric_map(q, f, gg);
  }
  return el_residual(rho, map, tau, eps_k);
}

// --- diagnostics -------------------------------------------------------------

double dissipation_bias(const GridSpec& g, double lambda, double M) {
  Density rho = steady_state({lambda, M}, {0.0, 0.0}, g);
  rho.scale_to_mass(M);
  return std::abs(dissipation(rho));
}

double tolerance_budget(const SchemeConfig& cfg, const GridSpec& g, double marginal_residual,
                        double dissipation_bias) {
  const double d = grid_diameter(g);
  return cfg.tau * dissipation_bias + 2.0 * marginal_residual * d * d / cfg.tau;
}

StepRecord step_diagnostics(const Density& prev, const JkoStep& step, double tau, double eps_k,
                            int k, const SchemeConfig& cfg, double dissipation_bias) {
  const Density& next = step.rho;
  StepRecord r;
  r.k = k;
  r.tau = tau;
  r.eps_k = eps_k;
  r.before = evaluate_functionals(prev, eps_k, cfg.lambda);
  r.after = evaluate_functionals(next, eps_k, cfg.lambda);
  r.h_before = r.before.h_lambda + r.before.h_lambda_tail;
  r.h_after = r.after.h_lambda + r.after.h_lambda_tail;
  r.free_energy_prev_eps = free_energy(prev, std::exp(cfg.log_eps_k(std::max(k - 1, 0))));
  const double w2_sq = step.w2_sq;
  r.w2_step = std::sqrt(w2_sq);
  r.w2_bound = cfg.f_bar2 * std::sqrt(tau);
  r.el_residual = el_residual(next, step.map, tau, eps_k);
  const double kappa = constants::kappa(next.mass(), cfg.lambda);
  const double two_k = std::ldexp(1.0, -k);
  r.h_dissipation_slack = (r.h_before - r.h_after) - tau * r.after.dissipation - kappa * w2_sq +
                          0.25 * cfg.q0 * tau * tau * two_k;
  r.f_monotonicity_slack =
      r.free_energy_prev_eps + cfg.z_tilde_c3 * tau * tau * two_k - r.before.free_energy;
  r.step_size_slack = 2.0 * tau * (r.before.free_energy - r.after.free_energy) - w2_sq;
  r.budget = tolerance_budget(cfg, next.spec(), step.info.marginal_residual, dissipation_bias);
  const Density ref =
      steady_state({cfg.lambda, profile_mass(next, cfg.lambda)}, {0.0, 0.0}, next.spec());
  r.l1_to_steady = l1_distance(next, ref);
  for (double p : {1.5, 2.0, 3.0}) r.lp_snapshot[p] = lp_norm(next, p);
  r.solver = step.info;
  return r;
}

// --- trajectories ------------------------------------------------------------

const Density& Trajectory::piecewise_constant(double t) const {
  if (knots.empty()) throw std::logic_error("trajectory: no knots");
  const double tau = config.tau;
  const long k = t <= 0.0 ? 0 : static_cast<long>(std::ceil(t / tau - 1e-12));
  return knots[static_cast<std::size_t>(std::min<long>(k, static_cast<long>(knots.size()) - 1))];
}

Density Trajectory::lipschitz(double t, const OTSolverConfig& ot) const {
  if (knots.empty()) throw std::logic_error("trajectory: no knots");
  const double x = std::max(t, 0.0) / config.tau;
  const std::size_t k = static_cast<std::size_t>(std::floor(x));
  if (k + 1 >= knots.size()) return knots.back();
  const double s = x - static_cast<double>(k);
  if (s == 0.0) return knots[k];
  return displacement_interpolation(knots[k], knots[k + 1], s, ot).rho;
}

std::string checkpoint_stem(const std::string& dir, int k) {
  std::ostringstream os;
  os << "step_" << std::setw(5) << std::setfill('0') << k;
  return (std::filesystem::path(dir) / os.str()).string();
}

int latest_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) return -1;
  static const std::regex re("step_(\\d+)\\.meta");
  int best = -1;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = e.path().filename().string();
    if (!std::regex_match(name, m, re)) continue;
    const int k = std::stoi(m[1].str());
    const std::string stem = checkpoint_stem(dir, k);
    if (fs::exists(stem + ".grid") && fs::exists(stem + ".warm")) best = std::max(best, k);
  }
  return best;
}

namespace {

void write_checkpoint(const std::string& dir, int k, const Density& rho, double tau, double eps,
                      double objective, const WarmStart& warm) {
  const std::string stem = checkpoint_stem(dir, k);
  write_grid_file(stem + ".grid", rho);
  {
    std::ofstream os(stem + ".warm");
    os << std::setprecision(17);
    for (double v : warm.f_sym) os << v << "\n";
    if (!os) throw std::runtime_error("checkpoint: cannot write " + stem + ".warm");
  }
  std::ofstream os(stem + ".meta");
  os << std::setprecision(17) << "k = " << k << "\ntau = " << tau << "\neps_k = " << eps
     << "\nobjective = " << objective << "\n";
  if (!os) throw std::runtime_error("checkpoint: cannot write " + stem + ".meta");
}

WarmStart read_warm(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("checkpoint: cannot read " + path);
  WarmStart w;
  double v;
  while (is >> v) w.f_sym.push_back(v);
  return w;
}

}  // namespace

Trajectory run(const Density& rho0, const SchemeConfig& cfg, const RunOptions& opts) {
  validate_step_size(cfg);
  Trajectory tr;
  tr.config = cfg;
  const GridSpec& g = rho0.spec();
  const double dbias = dissipation_bias(g, cfg.lambda, rho0.mass());
  const bool ckpt = !opts.checkpoint_dir.empty();
  WarmStart warm;
  tr.knots.push_back(rho0);
  int k0 = 0;
  if (ckpt) {
    std::filesystem::create_directories(opts.checkpoint_dir);
    const int last = opts.resume ? latest_checkpoint(opts.checkpoint_dir) : -1;
    if (last > 0) {
      for (int k = 1; k <= last; ++k)
        tr.knots.push_back(read_grid_file(checkpoint_stem(opts.checkpoint_dir, k) + ".grid"));
      if (!(tr.knots.back().spec() == g))
        throw std::runtime_error("resume: checkpoint grid differs from the initial data");
      warm = read_warm(checkpoint_stem(opts.checkpoint_dir, last) + ".warm");
      k0 = last;
    } else {
      write_checkpoint(opts.checkpoint_dir, 0, rho0, cfg.tau, cfg.eps_k(0),
                       free_energy(rho0, cfg.eps_k(0)), warm);
    }
  }

  const auto l1_steady = [&](const Density& rho) {
    return l1_distance(
        rho, steady_state({cfg.lambda, profile_mass(rho, cfg.lambda)}, {0.0, 0.0}, g));
  };
  for (int k = k0 + 1; k <= cfg.max_steps; ++k) {
    const Density& cur = tr.knots.back();
    if (cfg.l1_target > 0.0 && l1_steady(cur) < cfg.l1_target) break;
    const double eps = cfg.eps_k(k);
    JkoStep step;
    try {
      step = jko_step(cur, cfg.tau, eps, cfg, &warm);
    } catch (const JkoError& e) {
      tr.failure = e.what();
      return tr;
    }
    StepRecord rec = step_diagnostics(cur, step, cfg.tau, eps, k, cfg, dbias);
    if (ckpt)
      write_checkpoint(opts.checkpoint_dir, k, step.rho, cfg.tau, eps, step.info.objective, warm);
    tr.knots.push_back(std::move(step.rho));
    tr.records.push_back(std::move(rec));
    if (opts.on_step) opts.on_step(tr.records.back(), tr.knots.back());
  }
  tr.completed = true;
  return tr;
}

// --- weak form ---------------------------------------------------------------

double TestFunction::value(double x, double y) const {
  switch (kind) {
    case Kind::Coordinate:
      return axis == 0 ? x : y;
    case Kind::TruncatedSquare: {
      const double R2 = radius * radius, s = x * x + y * y;
      if (s <= R2) return s;
      const double t = std::min((s - R2) / (3.0 * R2), 1.0);
      return R2 + 3.0 * R2 * (t - t * t * t + 0.5 * t * t * t * t);
    }
    case Kind::Bump: {
      const double dx = x - center[0], dy = y - center[1];
      const double u = (dx * dx + dy * dy) / (radius * radius);
      return u < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - u)) : 0.0;
    }
  }
  return 0.0;
}

Vec2 TestFunction::gradient(double x, double y) const {
  switch (kind) {
    case Kind::Coordinate:
      return axis == 0 ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
    case Kind::TruncatedSquare: {
      const double R2 = radius * radius, s = x * x + y * y;
      const double t = std::clamp((s - R2) / (3.0 * R2), 0.0, 1.0);
      const double d = 1.0 - smoothstep(t);
      return {2.0 * x * d, 2.0 * y * d};
    }
    case Kind::Bump: {
      const double dx = x - center[0], dy = y - center[1], R2 = radius * radius;
      const double u = (dx * dx + dy * dy) / R2;
      if (u >= 1.0) return {0.0, 0.0};
      const double w = 1.0 - u;
      const double d = -std::exp(1.0 - 1.0 / w) / (w * w) * 2.0 / R2;
      return {d * dx, d * dy};
    }
  }
  return {0.0, 0.0};
}

double TestFunction::laplacian(double x, double y) const {
  switch (kind) {
    case Kind::Coordinate:
      return 0.0;
    case Kind::TruncatedSquare: {
      const double R2 = radius * radius, s = x * x + y * y;
      const double t = (s - R2) / (3.0 * R2);
      if (t <= 0.0) return 4.0;
      if (t >= 1.0) return 0.0;
      const double d1 = 1.0 - smoothstep(t);
      const double d2 = -6.0 * t * (1.0 - t) / (3.0 * R2);
      return 4.0 * d1 + 4.0 * s * d2;
    }
    case Kind::Bump: {
      const double dx = x - center[0], dy = y - center[1], R2 = radius * radius;
      const double u = (dx * dx + dy * dy) / R2;
      if (u >= 1.0) return 0.0;
      const double w = 1.0 - u, phi = std::exp(1.0 - 1.0 / w);
      const double p1 = -phi / (w * w);
      const double p2 = phi * (1.0 / (w * w * w * w) - 2.0 / (w * w * w));
      return p2 * 4.0 * u / R2 + p1 * 4.0 / R2;
    }
  }
  return 0.0;
}

double weak_form_rate(const Density& rho, const TestFunction& psi) {
  const GridSpec& g = rho.spec();
  const double h2 = g.cell_area();
  std::vector<double> kx, ky;
  KernelOperator::get(g, 0.0)->apply_gradient(rho.values(), kx, ky);
  // h^2 sum_j rho_j (x_i - x_j)/|x_i - x_j|^2 = -2 pi (grad G * rho)_i
  double lap = 0.0, pair = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const std::size_t k = g.index(i, j);
      const double x = g.center(i), y = g.center(j), r = rho[k];
      if (r == 0.0) continue;
      const Vec2 gp = psi.gradient(x, y);
      const double l = psi.laplacian(x, y);
      lap += l * r;
      pair += 2.0 * r * (-2.0 * kPi) * (gp[0] * kx[k] + gp[1] * ky[k]) + 0.5 * r * r * h2 * l;
    }
  return lap * h2 - pair * h2 / (4.0 * kPi);
}

}  // namespace pks
