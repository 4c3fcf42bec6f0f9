#include "pks/transport.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace pks {

namespace {

constexpr double kSupportThreshold = 1e-14;
constexpr std::size_t kExactCap = 4096;

struct Support {
  std::vector<std::size_t> cells;
  PointMeasure pm;
};

Support support_of(const Density& rho, const std::vector<double>& w) {
  Support s;
  const GridSpec& g = rho.spec();
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const std::size_t k = g.index(i, j);
      if (w[k] > 0.0) {
        s.cells.push_back(k);
        s.pm.x.push_back({g.center(i), g.center(j)});
        s.pm.w.push_back(w[k]);
      }
    }
  return s;
}

std::vector<Vec2> map_from_plan(const GridSpec& g, const Support& src, const Support& dst,
                                const std::vector<PlanEntry>& plan) {
  std::vector<Vec2> map(g.size());
  std::vector<double> row(src.cells.size(), 0.0);
  std::vector<Vec2> acc(src.cells.size(), Vec2{0.0, 0.0});
  for (const PlanEntry& e : plan) {
    row[e.i] += e.mass;
    acc[e.i][0] += e.mass * dst.pm.x[e.j][0];
    acc[e.i][1] += e.mass * dst.pm.x[e.j][1];
  }
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) map[g.index(i, j)] = {g.center(i), g.center(j)};
  for (std::size_t s = 0; s < src.cells.size(); ++s)
    if (row[s] > 0.0) map[src.cells[s]] = {acc[s][0] / row[s], acc[s][1] / row[s]};
  return map;
}

std::vector<PlanEntry> to_cells(const Support& src, const Support& dst,
                                const std::vector<PlanEntry>& plan, double M) {
  std::vector<PlanEntry> out;
  out.reserve(plan.size());
  for (const PlanEntry& e : plan) out.push_back({src.cells[e.i], dst.cells[e.j], e.mass * M});
  return out;
}

}  // namespace

std::vector<double> normalized_weights(const Density& rho) {
  double mx = 0.0;
  for (double v : rho.values()) mx = std::max(mx, v);
  if (!(mx > 0.0)) throw std::invalid_argument("transport: zero density");
  std::vector<double> w(rho.size());
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = rho[k] >= kSupportThreshold * mx ? rho[k] : 0.0;
    s += w[k];
  }
  for (double& x : w) x /= s;
  return w;
}

double grid_diameter(const GridSpec& spec) {
  return std::sqrt(2.0) * (spec.n - 1) * spec.h();
}

TransportResult wasserstein(const Density& rho, const Density& sigma, double p,
                            const OTSolverConfig& cfg) {
  if (!(rho.spec() == sigma.spec())) throw std::invalid_argument("wasserstein: grid mismatch");
  if (!(p >= 1.0 && p <= 2.0)) throw std::invalid_argument("wasserstein: p must lie in [1,2]");
  const double M = rho.mass();
  if (!(M > 0.0) || std::abs(M - sigma.mass()) > 1e-6 * M)
    throw std::invalid_argument("wasserstein: masses differ");
  const GridSpec& g = rho.spec();
  const std::vector<double> a = normalized_weights(rho), b = normalized_weights(sigma);

  TransportResult r;
  r.p = p;
  r.mass = M;

  if (cfg.method == OTSolverConfig::Method::ExactSmall) {
    const Support sa = support_of(rho, a), sb = support_of(sigma, b);
    if (sa.cells.size() > kExactCap || sb.cells.size() > kExactCap)
      throw std::invalid_argument("wasserstein: exact solver limited to 4096 support points");
    const DiscreteOTResult d = exact_ot(sa.pm, sb.pm, p);
    r.raw_value = d.value;
    r.cost = std::sqrt(M) * std::pow(std::max(d.value, 0.0), 1.0 / p);
    r.plan = to_cells(sa, sb, d.plan, M);
    r.map = map_from_plan(g, sa, sb, d.plan);
    r.marginal_residual = d.marginal_residual;
    r.iterations = d.iterations;
    return r;
  }

  const double eps = cfg.sinkhorn_epsilon > 0.0 ? cfg.sinkhorn_epsilon : 2.0 * g.h() * g.h();
  r.epsilon = eps;
  if (p == 2.0) {
    GridSinkhorn sk(g, eps);
    SinkhornStats st = sk.solve(a, b, r.f, r.g, cfg.marginal_tol, cfg.max_iters, cfg.eps_scaling);
    r.iterations = st.iterations;
    r.marginal_residual = st.marginal_residual;
    if (!st.converged)
      throw TransportError("wasserstein: Sinkhorn did not converge", st.marginal_residual);
    r.raw_value = st.value;
    double val = st.value;
    if (cfg.debias) {
      std::vector<double> fa, fb;
      const SinkhornStats sa = sk.solve_symmetric(a, fa, cfg.marginal_tol, cfg.max_iters);
      const SinkhornStats sb = sk.solve_symmetric(b, fb, cfg.marginal_tol, cfg.max_iters);
      if (!sa.converged || !sb.converged)
        throw TransportError("wasserstein: symmetric Sinkhorn did not converge",
                             std::max(sa.marginal_residual, sb.marginal_residual));
      val -= 0.5 * (sa.value + sb.value);
      r.iterations += sa.iterations + sb.iterations;
    }
    r.cost = std::sqrt(M * std::max(val, 0.0));
    r.map = sk.barycentric_map(b, r.f, r.g);
    return r;
  }

  const Support sa = support_of(rho, a), sb = support_of(sigma, b);
  if (sa.cells.size() > kExactCap || sb.cells.size() > kExactCap)
    throw std::invalid_argument("wasserstein: p < 2 entropic solver limited to 4096 support points");
  const DiscreteOTResult d =
      sinkhorn_points(sa.pm, sb.pm, p, eps, cfg.max_iters, cfg.marginal_tol, cfg.eps_scaling);
  r.iterations = d.iterations;
  r.marginal_residual = d.marginal_residual;
  if (d.marginal_residual > cfg.marginal_tol)
    throw TransportError("wasserstein: Sinkhorn did not converge", d.marginal_residual);
  r.raw_value = d.value;
  double val = d.value;
  if (cfg.debias) {
    val -= 0.5 * (sinkhorn_points(sa.pm, sa.pm, p, eps, cfg.max_iters, cfg.marginal_tol, true).value +
                  sinkhorn_points(sb.pm, sb.pm, p, eps, cfg.max_iters, cfg.marginal_tol, true).value);
  }
  r.cost = std::sqrt(M) * std::pow(std::max(val, 0.0), 1.0 / p);
  r.plan = to_cells(sa, sb, d.plan, M);
  r.map = map_from_plan(g, sa, sb, d.plan);
  return r;
}

OrderingResult ordering_check(const Density& rho, const Density& sigma, double p,
                              const OTSolverConfig& cfg, double rel_tol) {
  OrderingResult o;
  o.wp = wasserstein(rho, sigma, p, cfg).cost;
  o.w2 = p == 2.0 ? o.wp : wasserstein(rho, sigma, 2.0, cfg).cost;
  const double scale = std::sqrt(rho.mass()) * rho.spec().h();
  o.holds = o.wp <= o.w2 * (1.0 + rel_tol) + 1e-12 * scale;
  return o;
}

InterpolationResult push_along_map(const Density& rho, const std::vector<Vec2>& map, double t) {
  const GridSpec& g = rho.spec();
  const double h = g.h();
  std::vector<double> out(g.size(), 0.0);
  double parked = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const std::size_t k = g.index(i, j);
      const double m = rho[k];
      if (m == 0.0) continue;
      const double x = (1.0 - t) * g.center(i) + t * map[k][0];
      const double y = (1.0 - t) * g.center(j) + t * map[k][1];
      // continuous cell coordinates of the image point
      double u = (x + g.L) / h - 0.5, v = (y + g.L) / h - 0.5;
      if (u < 0.0 || v < 0.0 || u > g.n - 1 || v > g.n - 1) {
        if (x < -g.L || x > g.L || y < -g.L || y > g.L) parked += m;
        u = std::clamp(u, 0.0, static_cast<double>(g.n - 1));
        v = std::clamp(v, 0.0, static_cast<double>(g.n - 1));
      }
      const int i0 = std::min(static_cast<int>(std::floor(u)), g.n - 2);
      const int j0 = std::min(static_cast<int>(std::floor(v)), g.n - 2);
      const double fu = u - i0, fv = v - j0;
      out[g.index(i0, j0)] += m * (1 - fu) * (1 - fv);
      out[g.index(i0 + 1, j0)] += m * fu * (1 - fv);
      out[g.index(i0, j0 + 1)] += m * (1 - fu) * fv;
      out[g.index(i0 + 1, j0 + 1)] += m * fu * fv;
    }
  InterpolationResult r{Density(g, std::move(out)), parked * g.cell_area()};
  if (r.parked_mass > 0.0)
    std::cerr << "warning: displacement interpolation parked mass " << r.parked_mass
              << " outside the box\n";
  return r;
}

InterpolationResult displacement_interpolation(const Density& rho, const Density& sigma, double t,
                                               const OTSolverConfig& cfg) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("interpolation: t must lie in [0,1]");
  const TransportResult tr = wasserstein(rho, sigma, 2.0, cfg);
  return push_along_map(rho, tr.map, t);
}

double pushforward_check(const Density& rho, const std::vector<Vec2>& map, const Density& sigma) {
  const GridSpec& g = rho.spec();
  // bounded Lipschitz dictionary: plane waves and Cauchy bumps
  struct Wave {
    double kx, ky;
    bool sine;
  };
  std::vector<Wave> waves;
  for (double s : {0.25, 0.5, 1.0})
    for (auto [kx, ky] : {std::pair{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {1.0, -1.0}})
      for (bool sine : {false, true}) waves.push_back({s * kx, s * ky, sine});
  const std::vector<Vec2> centers = {{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  auto zeta = [&](std::size_t q, double x, double y) {
    if (q < waves.size()) {
      const double a = waves[q].kx * x + waves[q].ky * y;
      return waves[q].sine ? std::sin(a) : std::cos(a);
    }
    const Vec2& c = centers[q - waves.size()];
    return 1.0 / (1.0 + (x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1]));
  };
  const std::size_t nq = waves.size() + centers.size();
  double worst = 0.0;
  for (std::size_t q = 0; q < nq; ++q) {
    double lhs = 0.0, rhs = 0.0;
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j) {
        const std::size_t k = g.index(i, j);
        if (rho[k] != 0.0) lhs += rho[k] * zeta(q, map[k][0], map[k][1]);
        if (sigma[k] != 0.0) rhs += sigma[k] * zeta(q, g.center(i), g.center(j));
      }
    worst = std::max(worst, std::abs(lhs - rhs) * g.cell_area());
  }
  return worst / rho.mass();
}

}  // namespace pks
