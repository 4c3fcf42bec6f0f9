#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pks/transport.hpp"

namespace pks {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kBlock = 32;
// Terms whose log-weight trails the diagonal term by more than this are dropped.
constexpr double kDropLog = 60.0;

int band_for(double slope, double c, int n) {
  if (c <= 0.0) return n - 1;
  const double d = (slope + std::sqrt(slope * slope + 4.0 * c * kDropLog)) / (2.0 * c);
  if (!(d < n)) return n - 1;
  return std::min(n - 1, static_cast<int>(std::ceil(d)));
}

// out_i = LSE_j(in_j - c (i - j)^2) on one contiguous line.
void lse_line(const double* in, double* out, int n, double c, int band, const double* w,
              double* e) {
  for (int b0 = 0; b0 < n; b0 += kBlock) {
    const int b1 = std::min(n, b0 + kBlock);
    const int lo = std::max(0, b0 - band), hi = std::min(n - 1, b1 - 1 + band);
    double m = kNegInf;
    for (int j = lo; j <= hi; ++j) m = std::max(m, in[j]);
    if (m == kNegInf) {
      for (int i = b0; i < b1; ++i) out[i] = kNegInf;
      continue;
    }
    for (int j = lo; j <= hi; ++j) e[j] = std::exp(in[j] - m);
    for (int i = b0; i < b1; ++i) {
      const int jl = std::max(0, i - band), jh = std::min(n - 1, i + band);
      double s = 0.0;
      for (int j = jl; j <= jh; ++j) s += e[j] * w[std::abs(i - j)];
      if (s > 1e-280) {
        out[i] = m + std::log(s);
        continue;
      }
      double mi = kNegInf;
      for (int j = jl; j <= jh; ++j) mi = std::max(mi, in[j] - c * (i - j) * (i - j));
      if (mi == kNegInf) {
        out[i] = kNegInf;
        continue;
      }
      double t = 0.0;
      for (int j = jl; j <= jh; ++j) t += std::exp(in[j] - c * (i - j) * (i - j) - mi);
      out[i] = mi + std::log(t);
    }
  }
}

double max_slope_rows(const std::vector<double>& A, int n) {
  double s = 0.0;
  for (int r = 0; r < n; ++r) {
    const double* row = A.data() + static_cast<std::size_t>(r) * n;
    for (int j = 0; j + 1 < n; ++j)
      if (row[j] != kNegInf && row[j + 1] != kNegInf) s = std::max(s, std::abs(row[j + 1] - row[j]));
  }
  return s;
}

void transpose(const std::vector<double>& A, std::vector<double>& T, int n) {
  T.resize(A.size());
  constexpr int B = 32;
  for (int i0 = 0; i0 < n; i0 += B)
    for (int j0 = 0; j0 < n; j0 += B)
      for (int i = i0; i < std::min(n, i0 + B); ++i)
        for (int j = j0; j < std::min(n, j0 + B); ++j)
          T[static_cast<std::size_t>(j) * n + i] = A[static_cast<std::size_t>(i) * n + j];
}

int band_for_field(const std::vector<double>& A, int n, double c) {
  std::vector<double> T;
  transpose(A, T, n);
  return band_for(std::max(max_slope_rows(A, n), max_slope_rows(T, n)), c, n);
}

void lse_rows(std::vector<double>& A, int n, double c, int band) {
  if (band < 0) band = band_for(max_slope_rows(A, n), c, n);
  std::vector<double> w(band + 1), e(n), out(n);
  for (int d = 0; d <= band; ++d) w[d] = std::exp(-c * d * d);
  for (int r = 0; r < n; ++r) {
    double* row = A.data() + static_cast<std::size_t>(r) * n;
    lse_line(row, out.data(), n, c, band, w.data(), e.data());
    std::copy(out.begin(), out.end(), row);
  }
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (a[k] > 0.0) s += a[k] * b[k];
  return s;
}

std::vector<double> logs(const std::vector<double>& a) {
  std::vector<double> l(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) l[k] = a[k] > 0.0 ? std::log(a[k]) : kNegInf;
  return l;
}

// sum_k w_k |exp((old_k - new_k)/e) - 1|
double marginal_error(const std::vector<double>& w, const std::vector<double>& old_pot,
                      const std::vector<double>& new_pot, double e) {
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k)
    if (w[k] > 0.0) s += w[k] * std::abs(std::expm1((old_pot[k] - new_pot[k]) / e));
  return s;
}

}  // namespace

GridSinkhorn::GridSinkhorn(const GridSpec& spec, double eps) : spec_(spec), eps_(eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("sinkhorn: epsilon must be positive");
}

void GridSinkhorn::lse_pass(std::vector<double>& A, double e, int band) const {
  const int n = spec_.n;
  const double h = spec_.h();
  const double c = h * h / e;
  lse_rows(A, n, c, band);
  std::vector<double> T;
  transpose(A, T, n);
  lse_rows(T, n, c, band);
  transpose(T, A, n);
}

void GridSinkhorn::c_transform(const std::vector<double>& h, const std::vector<double>& lw,
                               double e, std::vector<double>& out) const {
  std::vector<double> A(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) A[k] = lw[k] == kNegInf ? kNegInf : lw[k] + h[k] / e;
  lse_pass(A, e);
  out.resize(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) out[k] = -e * A[k];
}

int GridSinkhorn::band_of(const std::vector<double>& A, double e) const {
  const double h = spec_.h();
  return band_for_field(A, spec_.n, h * h / e);
}

void GridSinkhorn::plan_apply(const std::vector<double>& F, const std::vector<double>& G, double e,
                              int band, const std::vector<double>& v,
                              std::vector<double>& out) const {
  const std::size_t N = F.size();
  std::vector<double> P(N), Q(N);
  for (std::size_t k = 0; k < N; ++k) {
    P[k] = v[k] > 0.0 ? G[k] + std::log(v[k]) : kNegInf;
    Q[k] = v[k] < 0.0 ? G[k] + std::log(-v[k]) : kNegInf;
  }
  lse_pass(P, e, band);
  lse_pass(Q, e, band);
  out.resize(N);
  for (std::size_t k = 0; k < N; ++k) out[k] = std::exp(F[k] + P[k]) - std::exp(F[k] + Q[k]);
}

namespace {

constexpr int kWarmSweeps = 10;
constexpr int kMaxCg = 400;
constexpr double kCgRelTol = 1e-5;

// Preconditioned conjugate gradients on a positive semidefinite system.
template <class Apply>
int pcg(Apply&& apply, const std::vector<double>& diag, const std::vector<double>& rhs,
        std::vector<double>& x, double rel_tol, int max_it) {
  const std::size_t N = rhs.size();
  x.assign(N, 0.0);
  std::vector<double> r(rhs), z(N), p(N), q(N);
  auto prec = [&](const std::vector<double>& in, std::vector<double>& out) {
    for (std::size_t k = 0; k < N; ++k) out[k] = diag[k] > 0.0 ? in[k] / diag[k] : 0.0;
  };
  prec(r, z);
  p = z;
  double rz = 0.0, r0 = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    rz += r[k] * z[k];
    r0 += r[k] * r[k];
  }
  r0 = std::sqrt(r0);
  if (r0 == 0.0) return 0;
  int it = 0;
  for (; it < max_it; ++it) {
    apply(p, q);
    double pq = 0.0;
    for (std::size_t k = 0; k < N; ++k) pq += p[k] * q[k];
    if (!(pq > 0.0)) break;
    const double alpha = rz / pq;
    double rn = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      x[k] += alpha * p[k];
      r[k] -= alpha * q[k];
      rn += r[k] * r[k];
    }
    if (std::sqrt(rn) < rel_tol * r0) {
      ++it;
      break;
    }
    prec(r, z);
    double rz_new = 0.0;
    for (std::size_t k = 0; k < N; ++k) rz_new += r[k] * z[k];
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t k = 0; k < N; ++k) p[k] = z[k] + beta * p[k];
  }
  return it;
}

double l1_gap(const std::vector<double>& w, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) s += std::abs(w[k] - r[k]);
  return s;
}

}  // namespace

SinkhornStats GridSinkhorn::solve(const std::vector<double>& a, const std::vector<double>& b,
                                  std::vector<double>& f, std::vector<double>& g, double tol,
                                  int max_iters, bool eps_scaling) const {
  const std::size_t N = spec_.size();
  if (a.size() != N || b.size() != N) throw std::invalid_argument("sinkhorn: size mismatch");
  const std::vector<double> la = logs(a), lb = logs(b);
  if (f.size() != N) f.assign(N, 0.0);
  if (g.size() != N) g.assign(N, 0.0);

  std::vector<double> stages;
  if (eps_scaling) {
    const double d = grid_diameter(spec_);
    for (double e = d * d; e > eps_; e *= 0.5) stages.push_back(e);
  }
  stages.push_back(eps_);

  SinkhornStats st;
  std::vector<double> gn;
  for (std::size_t s = 0; s + 1 < stages.size(); ++s) {
    const double e = stages[s];
    for (int it = 0; it < 200; ++it) {
      c_transform(f, la, e, gn);
      const double err = marginal_error(b, g, gn, e);
      g.swap(gn);
      c_transform(g, lb, e, f);
      ++st.iterations;
      if (err < 1e-5 && it > 0) break;
    }
  }

  const double e = eps_;
  for (int it = 0; it < kWarmSweeps; ++it) {
    c_transform(f, la, e, gn);
    g.swap(gn);
    c_transform(g, lb, e, f);
    ++st.iterations;
  }

  std::vector<double> ft, gt, r(N), c(N), rhs(2 * N), diag(2 * N), dx, F(N), G(N), fn(N), gnn(N);
  double sum_pi = 1.0;
  for (int nit = 0; nit < 100; ++nit) {
    c_transform(g, lb, e, ft);
    c_transform(f, la, e, gt);
    sum_pi = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      r[k] = a[k] > 0.0 ? a[k] * std::exp((f[k] - ft[k]) / e) : 0.0;
      c[k] = b[k] > 0.0 ? b[k] * std::exp((g[k] - gt[k]) / e) : 0.0;
      sum_pi += r[k];
    }
    st.marginal_residual = l1_gap(a, r) + l1_gap(b, c);
    if (st.marginal_residual < tol || st.iterations >= max_iters) break;
    const double d0 = dot(a, f) + dot(b, g) - e * (sum_pi - 1.0);

    for (std::size_t k = 0; k < N; ++k) {
      F[k] = la[k] == kNegInf ? kNegInf : la[k] + f[k] / e;
      G[k] = lb[k] == kNegInf ? kNegInf : lb[k] + g[k] / e;
      rhs[k] = e * (a[k] - r[k]);
      rhs[N + k] = e * (b[k] - c[k]);
      diag[k] = r[k];
      diag[N + k] = c[k];
    }
    const int band = std::max(band_of(F, e), band_of(G, e));
    std::vector<double> xa(N), xb(N), ya, yb;
    auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
      std::copy(v.begin(), v.begin() + N, xa.begin());
      std::copy(v.begin() + N, v.end(), xb.begin());
      plan_apply(F, G, e, band, xb, ya);
      plan_apply(G, F, e, band, xa, yb);
      out.resize(2 * N);
      for (std::size_t k = 0; k < N; ++k) {
        out[k] = r[k] * xa[k] + ya[k];
        out[N + k] = yb[k] + c[k] * xb[k];
      }
    };
    st.cg_iterations += pcg(apply, diag, rhs, dx, kCgRelTol, kMaxCg);
    ++st.newton_steps;
    ++st.iterations;

    double slope = 0.0;
    for (std::size_t k = 0; k < 2 * N; ++k) slope += rhs[k] * dx[k] / e;
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      for (std::size_t k = 0; k < N; ++k) {
        fn[k] = f[k] + t * dx[k];
        gnn[k] = g[k] + t * dx[N + k];
      }
      c_transform(gnn, lb, e, ft);
      double sp = 0.0;
      for (std::size_t k = 0; k < N; ++k)
        if (a[k] > 0.0) sp += a[k] * std::exp((fn[k] - ft[k]) / e);
      const double d1 = dot(a, fn) + dot(b, gnn) - e * (sp - 1.0);
      if (d1 >= d0 + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      // Near convergence the objective change drowns in round-off; judge by the residual instead.
      if (std::abs(d1 - d0) <= 1e-13 * (std::abs(d0) + e)) {
        c_transform(fn, la, e, gt);
        double res = 0.0;
        for (std::size_t k = 0; k < N; ++k) {
          if (a[k] > 0.0) res += std::abs(a[k] - a[k] * std::exp((fn[k] - ft[k]) / e));
          if (b[k] > 0.0) res += std::abs(b[k] - b[k] * std::exp((gnn[k] - gt[k]) / e));
        }
        if (res < 0.5 * st.marginal_residual) {
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      for (int it = 0; it < kWarmSweeps; ++it) {
        c_transform(f, la, e, gn);
        g.swap(gn);
        c_transform(g, lb, e, f);
        ++st.iterations;
      }
      continue;
    }
    f.swap(fn);
    g.swap(gnn);
  }
  st.converged = st.marginal_residual < tol;
  st.value = dot(a, f) + dot(b, g) - e * (sum_pi - 1.0);
  return st;
}

SinkhornStats GridSinkhorn::solve_symmetric(const std::vector<double>& a, std::vector<double>& f,
                                            double tol, int max_iters) const {
  // The averaged fixed-point map contracts by at least 1/2 since the plan is positive semidefinite.
  const std::size_t N = spec_.size();
  const std::vector<double> la = logs(a);
  const double e = eps_;
  if (f.size() != N) f.assign(N, 0.0);
  SinkhornStats st;
  std::vector<double> t;
  double best = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int it = 0; it < max_iters; ++it) {
    c_transform(f, la, e, t);
    double err = 0.0;
    for (std::size_t k = 0; k < N; ++k)
      if (a[k] > 0.0) err += a[k] * std::abs(std::expm1((f[k] - t[k]) / e));
    for (std::size_t k = 0; k < N; ++k) f[k] = 0.5 * (f[k] + t[k]);
    ++st.iterations;
    st.marginal_residual = err;
    if (err < tol) break;
    if (err < 0.9 * best) {
      best = err;
      stalled = 0;
    } else if (++stalled >= 10) {
      break;
    }
  }
  c_transform(f, la, e, t);
  double sum_pi = 0.0;
  for (std::size_t k = 0; k < N; ++k)
    if (a[k] > 0.0) sum_pi += a[k] * std::exp((f[k] - t[k]) / e);
  st.converged = st.marginal_residual < tol;
  st.value = 2.0 * dot(a, f) - e * (sum_pi - 1.0);
  return st;
}

std::vector<Vec2> GridSinkhorn::barycentric_map(const std::vector<double>& b,
                                                const std::vector<double>& f,
                                                const std::vector<double>& g) const {
  (void)f;  // cancels in the row normalization
  const int n = spec_.n;
  const std::size_t N = spec_.size();
  const std::vector<double> lb = logs(b);
  std::vector<double> base(N);
  for (std::size_t k = 0; k < N; ++k) base[k] = lb[k] == kNegInf ? kNegInf : lb[k] + g[k] / eps_;
  std::vector<double> den = base;
  lse_pass(den, eps_);
  const double shift = spec_.L + 1.0;
  std::vector<Vec2> map(N);
  for (int comp = 0; comp < 2; ++comp) {
    std::vector<double> num = base;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const std::size_t k = spec_.index(i, j);
        const double y = spec_.center(comp == 0 ? i : j);
        if (num[k] != kNegInf) num[k] += std::log(y + shift);
      }
    lse_pass(num, eps_);
    for (std::size_t k = 0; k < N; ++k) map[k][comp] = std::exp(num[k] - den[k]) - shift;
  }
  return map;
}

}  // namespace pks
