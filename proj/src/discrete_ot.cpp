#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "pks/transport.hpp"

namespace pks {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cost_p(const Vec2& x, const Vec2& y, double p) {
  const double d2 = (x[0] - y[0]) * (x[0] - y[0]) + (x[1] - y[1]) * (x[1] - y[1]);
  if (p == 2.0) return d2;
  return std::pow(d2, 0.5 * p);
}

std::vector<double> normalize(const std::vector<double>& w) {
  double s = 0.0;
  for (double x : w) {
    if (!(x >= 0.0)) throw std::invalid_argument("ot: negative weight");
    s += x;
  }
  if (!(s > 0.0)) throw std::invalid_argument("ot: zero total weight");
  std::vector<double> out(w);
  for (double& x : out) x /= s;
  return out;
}


constexpr std::size_t kMaxNewtonSize = 1024;

// Dense Newton ascent on the dual with one potential pinned; returns the L1 marginal residual.
double newton_polish(const std::vector<double>& a, const std::vector<double>& b,
                     const std::vector<double>& C, double e, double tol, std::vector<double>& f,
                     std::vector<double>& g, int& iterations) {
  const std::size_t n = a.size(), m = b.size(), K = n + m - 1;
  Eigen::MatrixXd P(n, m);
  auto plan = [&](const std::vector<double>& ff, const std::vector<double>& gg) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const double v =
            a[i] > 0.0 && b[j] > 0.0 ? a[i] * b[j] * std::exp((ff[i] + gg[j] - C[i * m + j]) / e)
                                     : 0.0;
        P(i, j) = v;
        s += v;
      }
    return s;
  };
  auto dual = [&](const std::vector<double>& ff, const std::vector<double>& gg, double mass) {
    double d = -e * (mass - 1.0);
    for (std::size_t i = 0; i < n; ++i) d += a[i] > 0.0 ? a[i] * ff[i] : 0.0;
    for (std::size_t j = 0; j < m; ++j) d += b[j] > 0.0 ? b[j] * gg[j] : 0.0;
    return d;
  };
  double resid = kInf;
  std::vector<double> fn(n), gn(m);
  for (int it = 0; it < 50; ++it) {
    const double mass = plan(f, g);
    const Eigen::VectorXd r = P.rowwise().sum(), c = P.colwise().sum().transpose();
    resid = 0.0;
    Eigen::VectorXd grad(K);
    for (std::size_t i = 0; i < n; ++i) {
      grad(i) = a[i] - r(i);
      resid += std::abs(grad(i));
    }
    for (std::size_t j = 0; j < m; ++j) {
      resid += std::abs(b[j] - c(j));
      if (j + 1 < m) grad(n + j) = b[j] - c(j);
    }
    if (resid < tol) break;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(K, K);
    for (std::size_t i = 0; i < n; ++i) H(i, i) = r(i) + 1e-14;
    for (std::size_t j = 0; j + 1 < m; ++j) {
      H(n + j, n + j) = c(j) + 1e-14;
      for (std::size_t i = 0; i < n; ++i) H(i, n + j) = H(n + j, i) = P(i, j);
    }
    const Eigen::VectorXd d = e * H.ldlt().solve(grad);
    const double d0 = dual(f, g, mass), slope = grad.dot(d);
    double t = 1.0;
    bool ok = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) fn[i] = f[i] + t * d(i);
      for (std::size_t j = 0; j < m; ++j) gn[j] = g[j] + (j + 1 < m ? t * d(n + j) : 0.0);
      if (dual(fn, gn, plan(fn, gn)) >= d0 + 1e-4 * t * slope) {
        ok = true;
        break;
      }
    }
    ++iterations;
    if (!ok) break;
    f.swap(fn);
    g.swap(gn);
  }
  return resid;
}

}  // namespace

DiscreteOTResult exact_ot(const PointMeasure& A, const PointMeasure& B, double p) {
  const std::size_t n = A.x.size(), m = B.x.size();
  if (n == 0 || m == 0 || A.w.size() != n || B.w.size() != m)
    throw std::invalid_argument("exact_ot: malformed measures");
  const std::vector<double> a = normalize(A.w), b = normalize(B.w);
  std::vector<double> C(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) C[i * m + j] = cost_p(A.x[i], B.x[j], p);

  std::vector<double> supply(a), demand(b), flow(n * m, 0.0);
  // node potentials: sources 0..n-1, sinks n..n+m-1
  std::vector<double> pot(n + m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double mn = kInf;
    for (std::size_t i = 0; i < n; ++i) mn = std::min(mn, C[i * m + j]);
    pot[n + j] = mn;
  }
  const double zero_tol = 1e-15;
  std::vector<double> dist(n + m);
  std::vector<long> parent(n + m);
  std::vector<char> done(n + m);
  std::vector<std::size_t> root(n + m);

  int iterations = 0;
  for (;;) {
    double remaining = 0.0;
    for (double s : supply) remaining += s;
    if (remaining <= zero_tol) break;
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < n; ++i)
      if (supply[i] > zero_tol) {
        dist[i] = 0.0;
        root[i] = i;
      }
    long target = -1;
    for (;;) {
      long u = -1;
      double best = kInf;
      for (std::size_t v = 0; v < n + m; ++v)
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = static_cast<long>(v);
        }
      if (u < 0) break;
      done[u] = 1;
      if (static_cast<std::size_t>(u) >= n && demand[u - n] > zero_tol) {
        target = u;
        break;
      }
      if (static_cast<std::size_t>(u) < n) {
        const std::size_t i = u;
        for (std::size_t j = 0; j < m; ++j) {
          const std::size_t v = n + j;
          if (done[v]) continue;
          const double rc = C[i * m + j] + pot[i] - pot[v];
          const double nd = dist[i] + std::max(rc, 0.0);
          if (nd < dist[v]) {
            dist[v] = nd;
            parent[v] = static_cast<long>(i);
            root[v] = root[i];
          }
        }
      } else {
        const std::size_t j = u - n;
        for (std::size_t i = 0; i < n; ++i) {
          if (done[i] || flow[i * m + j] <= zero_tol) continue;
          const double rc = -C[i * m + j] + pot[u] - pot[i];
          const double nd = dist[u] + std::max(rc, 0.0);
          if (nd < dist[i]) {
            dist[i] = nd;
            parent[i] = u;
            root[i] = root[u];
          }
        }
      }
    }
    if (target < 0) throw std::runtime_error("exact_ot: no augmenting path");
    const double dt = dist[target];
    for (std::size_t v = 0; v < n + m; ++v) pot[v] += std::min(dist[v], dt);

    double delta = std::min(supply[root[target]], demand[target - n]);
    for (long v = target; parent[v] >= 0; v = parent[v]) {
      const long u = parent[v];
      if (static_cast<std::size_t>(u) >= n) {  // backward arc sink u -> source v
        delta = std::min(delta, flow[static_cast<std::size_t>(v) * m + (u - n)]);
      }
    }
    for (long v = target; parent[v] >= 0; v = parent[v]) {
      const long u = parent[v];
      if (static_cast<std::size_t>(u) < n)
        flow[static_cast<std::size_t>(u) * m + (v - n)] += delta;
      else
        flow[static_cast<std::size_t>(v) * m + (u - n)] -= delta;
    }
    supply[root[target]] -= delta;
    demand[target - n] -= delta;
    ++iterations;
  }

  DiscreteOTResult r;
  r.iterations = iterations;
  double resid = 0.0;
  for (std::size_t j = 0; j < m; ++j) resid += std::abs(demand[j]);
  r.marginal_residual = resid;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double fl = flow[i * m + j];
      if (fl > 0.0) {
        r.plan.push_back({i, j, fl});
        r.value += fl * C[i * m + j];
      }
    }
  return r;
}

DiscreteOTResult sinkhorn_points(const PointMeasure& A, const PointMeasure& B, double p, double eps,
                                 int max_iters, double tol, bool eps_scaling) {
  if (!(eps > 0.0)) throw std::invalid_argument("sinkhorn: epsilon must be positive");
  const std::size_t n = A.x.size(), m = B.x.size();
  const std::vector<double> a = normalize(A.w), b = normalize(B.w);
  std::vector<double> C(n * m);
  double cmax = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      C[i * m + j] = cost_p(A.x[i], B.x[j], p);
      cmax = std::max(cmax, C[i * m + j]);
    }
  std::vector<double> la(n), lb(m);
  for (std::size_t i = 0; i < n; ++i) la[i] = a[i] > 0.0 ? std::log(a[i]) : -kInf;
  for (std::size_t j = 0; j < m; ++j) lb[j] = b[j] > 0.0 ? std::log(b[j]) : -kInf;

  std::vector<double> f(n, 0.0), g(m, 0.0), gn(m), tmp(std::max(n, m));
  auto update_f = [&](double e) {
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -kInf;
      for (std::size_t j = 0; j < m; ++j) {
        tmp[j] = lb[j] + (g[j] - C[i * m + j]) / e;
        mx = std::max(mx, tmp[j]);
      }
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += std::exp(tmp[j] - mx);
      f[i] = -e * (mx + std::log(s));
    }
  };
  auto update_g = [&](double e) {
    for (std::size_t j = 0; j < m; ++j) {
      double mx = -kInf;
      for (std::size_t i = 0; i < n; ++i) {
        tmp[i] = la[i] + (f[i] - C[i * m + j]) / e;
        mx = std::max(mx, tmp[i]);
      }
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += std::exp(tmp[i] - mx);
      gn[j] = -e * (mx + std::log(s));
    }
  };

  std::vector<double> stages;
  if (eps_scaling)
    for (double e = std::max(cmax, eps); e > eps; e *= 0.7) stages.push_back(e);
  stages.push_back(eps);

  const bool newton = n + m <= kMaxNewtonSize;
  DiscreteOTResult r;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const double e = stages[s];
    const bool last = s + 1 == stages.size();
    const int iters = last ? max_iters : std::min(max_iters, 100);
    const double stol = last && !newton ? tol : std::max(tol, 1e-4);
    for (int it = 0; it < iters; ++it) {
      update_g(e);
      double err = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        if (b[j] > 0.0) err += b[j] * std::abs(std::expm1((g[j] - gn[j]) / e));
      g.swap(gn);
      update_f(e);
      ++r.iterations;
      r.marginal_residual = err;
      if (err < stol && it > 0) break;
    }
    if (newton) r.marginal_residual = newton_polish(a, b, C, e, last ? tol : 1e-6, f, g, r.iterations);
  }
  for (std::size_t i = 0; i < n; ++i) r.value += a[i] > 0.0 ? a[i] * f[i] : 0.0;
  for (std::size_t j = 0; j < m; ++j) r.value += b[j] > 0.0 ? b[j] * g[j] : 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (a[i] <= 0.0 || b[j] <= 0.0) continue;
      const double pij = a[i] * b[j] * std::exp((f[i] + g[j] - C[i * m + j]) / eps);
      if (pij > 0.0) r.plan.push_back({i, j, pij});
    }
  r.f = std::move(f);
  r.g = std::move(g);
  return r;
}

double sinkhorn_divergence_points(const PointMeasure& a, const PointMeasure& b, double p,
                                  double eps, int max_iters, double tol) {
  const double ab = sinkhorn_points(a, b, p, eps, max_iters, tol, true).value;
  const double aa = sinkhorn_points(a, a, p, eps, max_iters, tol, true).value;
  const double bb = sinkhorn_points(b, b, p, eps, max_iters, tol, true).value;
  return ab - 0.5 * (aa + bb);
}

}  // namespace pks
