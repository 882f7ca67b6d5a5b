#pragma once

// Unconstrained and equality-plus-box constrained maximization, plus the
// Bregman minimum-divergence solver and simulated-annealing machinery.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "evcore/linalg.hpp"
#include "evcore/rng.hpp"

namespace evcore {

using ScalarFn = std::function<double(double)>;
using ObjectiveFn = std::function<double(const Vec&)>;
using GradientFn = std::function<Vec(const Vec&)>;

inline constexpr double kGoldenRatio = 0.61803398874989484820;  // (sqrt(5)-1)/2

// ---- line searches ---------------------------------------------------------

struct LineResult {
  double x = 0.0;
  double f = 0.0;
  int iterations = 0;
};

// Golden ratio search on a unimodal f over [a, b]; the bracket shrinks by
// the factor r = 0.6180340 per iteration.
inline LineResult golden_section(const ScalarFn& f, double a, double b, double tol,
                                 int max_iter = 200,
                                 const std::function<void(double, double)>& on_bracket = nullptr) {
  if (!(b > a)) throw std::invalid_argument("golden_section: need a < b");
  const double r = kGoldenRatio;
  double x1 = b - r * (b - a);
  double x2 = a + r * (b - a);
  double f1 = f(x1), f2 = f(x2);
  if (!std::isfinite(f1)) throw std::runtime_error("golden_section: non-finite value at " + std::to_string(x1));
  if (!std::isfinite(f2)) throw std::runtime_error("golden_section: non-finite value at " + std::to_string(x2));
  int it = 0;
  if (on_bracket) on_bracket(a, b);
  while (b - a > tol && it < max_iter) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
      if (!std::isfinite(f1)) throw std::runtime_error("golden_section: non-finite value at " + std::to_string(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
      if (!std::isfinite(f2)) throw std::runtime_error("golden_section: non-finite value at " + std::to_string(x2));
    }
    ++it;
    if (on_bracket) on_bracket(a, b);
  }
  double xm = 0.5 * (a + b);
  return {xm, f(xm), it};
}

// Successive quadratic interpolation through a bracket eta1 < eta2 < eta3
// with f1 >= f2 <= f3. Falls back to golden section on degenerate fits.
inline LineResult quadratic_fit_line_search(const ScalarFn& f, double e1, double e2, double e3,
                                            double tol, int max_iter = 100) {
  double f1 = f(e1), f2 = f(e2), f3 = f(e3);
  // re-bracket if the interpolating pattern does not hold
  int guard = 0;
  while (!(f1 >= f2 && f2 <= f3) && guard++ < 60) {
    if (f1 < f2) {  // downhill to the left
      double w = e2 - e1;
      e3 = e2; f3 = f2;
      e2 = e1; f2 = f1;
      e1 = e1 - 2.0 * w;
      f1 = f(e1);
    } else {  // downhill to the right
      double w = e3 - e2;
      e1 = e2; f1 = f2;
      e2 = e3; f2 = f3;
      e3 = e3 + 2.0 * w;
      f3 = f(e3);
    }
  }
  if (!(f1 >= f2 && f2 <= f3)) return golden_section(f, e1, e3, tol);

  int it = 0;
  while (e3 - e1 > tol && it < max_iter) {
    const double num = f1 * (e3 * e3 - e2 * e2) + f2 * (e1 * e1 - e3 * e3) + f3 * (e2 * e2 - e1 * e1);
    const double den = f1 * (e3 - e2) + f2 * (e1 - e3) + f3 * (e2 - e1);
    if (den == 0.0 || !std::isfinite(num / den)) return golden_section(f, e1, e3, tol);
    double e4 = 0.5 * num / den;
    if (!(e4 > e1 && e4 < e3)) return golden_section(f, e1, e3, tol);
    if (std::fabs(e4 - e2) <= tol) return {e4, f(e4), it + 1};  // fit has settled
    double f4 = f(e4);
    if (e4 < e2) {
      if (f4 <= f2) { e3 = e2; f3 = f2; e2 = e4; f2 = f4; }
      else          { e1 = e4; f1 = f4; }
    } else {
      if (f4 <= f2) { e1 = e2; f1 = f2; e2 = e4; f2 = f4; }
      else          { e3 = e4; f3 = f4; }
    }
    ++it;
  }
  return {e2, f2, it};
}

namespace detail {

// Minimize phi(eta) on [0, eta_max] by an Illinois-type regula falsi on the
// directional derivative; the first step is the plain secant, so the search
// is exact in one step when phi is quadratic. Points where phi or its
// derivative stop being usable (infinite barriers, overflow regions) are
// treated as an upper wall and bisected against.
inline double line_min_derivative(const ScalarFn& phi, const ScalarFn& dphi, double eta_max,
                                  double tol) {
  const double big = 1e99;
  auto usable = [&](double d, double p) { return std::isfinite(d) && p < big; };

  const double d0 = dphi(0.0);
  const double p0 = phi(0.0);
  if (!(d0 < 0.0)) return 0.0;

  // expansion: find an upper end that either has non-negative slope or is
  // past the usable region
  double hi = std::min(1.0, eta_max);
  double dhi = 0.0;
  bool wall = false;
  double lo = 0.0, dlo = d0;
  for (int expand = 0;; ++expand) {
    double ph = phi(hi);
    dhi = dphi(hi);
    if (!usable(dhi, ph)) {
      wall = true;
      break;
    }
    if (dhi >= 0.0) break;
    if (hi >= eta_max || expand >= 60) return hi;  // descending all the way to the cap
    lo = hi;
    dlo = dhi;
    hi = std::min(4.0 * hi, eta_max);
  }

  double wlo = dlo, whi = wall ? std::fabs(d0) : dhi;  // Illinois-weighted slopes
  int side = 0;
  double eta = lo;
  for (int it = 0; it < 200; ++it) {
    double cand;
    if (!wall && whi != wlo) {
      cand = lo - wlo * (hi - lo) / (whi - wlo);
      if (!(cand > lo && cand < hi)) cand = 0.5 * (lo + hi);
    } else {
      cand = 0.5 * (lo + hi);
    }
    double pc = phi(cand);
    double dc = dphi(cand);
    if (!usable(dc, pc)) {  // still inside the wall
      hi = cand;
      wall = true;
      continue;
    }
    eta = cand;
    if (std::fabs(dc) <= tol * (1.0 + std::fabs(d0)) || hi - lo <= tol * (1.0 + hi)) break;
    if (dc < 0.0) {
      lo = cand;
      dlo = dc;
      wlo = dc;
      if (side == -1 && !wall) whi *= 0.5;  // hi retained twice: down-weight it
      side = -1;
    } else {
      hi = cand;
      dhi = dc;
      whi = dc;
      wall = false;
      if (side == +1) wlo *= 0.5;
      side = +1;
    }
  }
  if (!(phi(eta) <= p0)) {
    // derivative information was unreliable; fall back to golden section on
    // the last usable stretch
    return golden_section(phi, 0.0, std::max(eta, 1e-12), tol).x;
  }
  return eta;
}

}  // namespace detail

// ---- ParTan ----------------------------------------------------------------

enum class OptimStatus { Converged, MaxIterations, LineSearchFailure, SingularBasis, RestorationFailure };

struct OptimResult {
  Vec x;
  double f = 0.0;
  double feasibility = 0.0;  // ||h(x)||_inf
  int iterations = 0;
  OptimStatus status = OptimStatus::Converged;
  std::string message;
  bool ok() const { return status == OptimStatus::Converged; }
};

// Gradient ParTan: Cauchy steps interleaved with acceleration line searches
// along (y^k - x^{k-1}); terminates exactly on quadratics in <= n cycles.
// on_iterate, when set, receives every accepted x^k.
inline OptimResult partan_minimize(const ObjectiveFn& f, const GradientFn& grad, const Vec& x0,
                                   double tol, int max_cycles = 400, double ls_tol = 1e-12,
                                   const std::function<void(const Vec&)>& on_iterate = nullptr) {
  const int n = static_cast<int>(x0.size());
  auto norm_inf = [](const Vec& v) {
    double m = 0.0;
    for (double t : v) m = std::max(m, std::fabs(t));
    return m;
  };
  auto axpy = [&](const Vec& x, double eta, const Vec& d) {
    Vec y(x);
    for (int i = 0; i < n; ++i) y[i] += eta * d[i];
    return y;
  };
  auto line_min = [&](const Vec& x, const Vec& d) {
    ScalarFn phi = [&](double eta) { return f(axpy(x, eta, d)); };
    ScalarFn dphi = [&](double eta) {
      Vec g = grad(axpy(x, eta, d));
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += g[i] * d[i];
      return s;
    };
    return detail::line_min_derivative(phi, dphi, 1e12, ls_tol);
  };

  OptimResult res;
  Vec x_prev = x0;           // x^{k-1}
  Vec g = grad(x_prev);
  if (norm_inf(g) <= tol) {
    res.x = x_prev;
    res.f = f(x_prev);
    return res;
  }
  Vec d(n);
  for (int i = 0; i < n; ++i) d[i] = -g[i];
  Vec x_cur = axpy(x_prev, line_min(x_prev, d), d);  // x^1 = y^0
  if (on_iterate) on_iterate(x_cur);
  int cycle = 0;
  int since_restart = 0;
  for (; cycle < max_cycles; ++cycle) {
    g = grad(x_cur);
    if (norm_inf(g) <= tol) {
      res.status = OptimStatus::Converged;
      break;
    }
    for (int i = 0; i < n; ++i) d[i] = -g[i];
    Vec y = axpy(x_cur, line_min(x_cur, d), d);  // Cauchy step
    Vec accel(n);
    for (int i = 0; i < n; ++i) accel[i] = y[i] - x_prev[i];
    Vec x_next = y;
    if (norm_inf(accel) > 0.0) {
      double beta = line_min(y, accel);
      x_next = axpy(y, beta, accel);
    }
    if (f(x_next) > f(x_cur) + 1e-14 * (1.0 + std::fabs(f(x_cur)))) {
      res.status = OptimStatus::LineSearchFailure;
      res.message = "acceleration step failed to descend";
      x_cur = y;
      break;
    }
    x_prev = x_cur;
    x_cur = x_next;
    if (on_iterate) on_iterate(x_cur);
    if (++since_restart >= n + 1) {  // periodic restart off the quadratic model
      since_restart = 0;
      x_prev = x_cur;
      Vec gr = grad(x_cur);
      if (norm_inf(gr) <= tol) { res.status = OptimStatus::Converged; break; }
      for (int i = 0; i < n; ++i) d[i] = -gr[i];
      x_cur = axpy(x_cur, line_min(x_cur, d), d);
    }
  }
  if (cycle >= max_cycles) res.status = OptimStatus::MaxIterations;
  res.x = x_cur;
  res.f = f(x_cur);
  res.iterations = cycle;
  if (res.status == OptimStatus::MaxIterations && norm_inf(grad(x_cur)) <= tol)
    res.status = OptimStatus::Converged;
  return res;
}

// ---- GRG -------------------------------------------------------------------

struct BoxBounds {
  Vec lo, hi;

  static BoxBounds unbounded(int n) {
    BoxBounds b;
    b.lo.assign(n, -std::numeric_limits<double>::infinity());
    b.hi.assign(n, std::numeric_limits<double>::infinity());
    return b;
  }
  void validate() const {
    if (lo.size() != hi.size()) throw std::invalid_argument("BoxBounds: size mismatch");
    for (size_t i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i])) throw std::invalid_argument("BoxBounds: need lo <= hi");
  }
  Vec clip(Vec x) const {
    for (size_t i = 0; i < x.size(); ++i) x[i] = std::min(std::max(x[i], lo[i]), hi[i]);
    return x;
  }
};

// Equality constraints h(x) = 0 with analytic Jacobian.
struct ConstraintSet {
  std::function<Vec(const Vec&)> h;
  std::function<Matrix(const Vec&)> jacobian;
  int count = 0;

  static ConstraintSet none() { return ConstraintSet{nullptr, nullptr, 0}; }
};

// Central finite-difference audit of an analytic Jacobian (or gradient when
// m = 1 rows); relative mismatch above tol is reported by row/column.
inline void audit_jacobian(const ConstraintSet& cs, const Vec& x, double tol = 1e-4) {
  if (cs.count == 0) return;
  Matrix j = cs.jacobian(x);
  const int n = static_cast<int>(x.size());
  double scale = 0.0;
  for (int r = 0; r < cs.count; ++r)
    for (int c = 0; c < n; ++c) scale = std::max(scale, std::fabs(j(r, c)));
  if (scale == 0.0) scale = 1.0;
  for (int c = 0; c < n; ++c) {
    double step = 1e-6 * (1.0 + std::fabs(x[c]));
    Vec xp = x, xm = x;
    xp[c] += step;
    xm[c] -= step;
    Vec hp = cs.h(xp), hm = cs.h(xm);
    for (int r = 0; r < cs.count; ++r) {
      double fd = (hp[r] - hm[r]) / (2.0 * step);
      if (std::fabs(fd - j(r, c)) > tol * (scale + std::fabs(fd))) {
        throw std::runtime_error("audit_jacobian: analytic/FD mismatch at row " + std::to_string(r) +
                                 ", column " + std::to_string(c));
      }
    }
  }
}

inline void audit_gradient(const ObjectiveFn& f, const GradientFn& grad, const Vec& x, double tol = 1e-4) {
  Vec g = grad(x);
  double scale = 0.0;
  for (double v : g) scale = std::max(scale, std::fabs(v));
  if (scale == 0.0) scale = 1.0;
  for (size_t c = 0; c < x.size(); ++c) {
    double step = 1e-6 * (1.0 + std::fabs(x[c]));
    Vec xp = x, xm = x;
    xp[c] += step;
    xm[c] -= step;
    double fd = (f(xp) - f(xm)) / (2.0 * step);
    if (std::fabs(fd - g[c]) > tol * (scale + std::fabs(fd)))
      throw std::runtime_error("audit_gradient: analytic/FD mismatch at component " + std::to_string(c));
  }
}

struct GrgOptions {
  double tol_feasibility = 1e-8;
  double tol_reduced_gradient = 1e-6;
  double tol_line_search = 1e-10;
  int max_iterations = 300;
  int max_restoration_steps = 40;
  double damping_fraction = 1e-6;  // epsilon = fraction * box width
  bool audit_start_jacobian = true;
};

namespace detail {

struct GrgWork {
  std::vector<int> basic, residual;
};

// Partition columns of J into an invertible basic block and the rest,
// preferring well-scaled pivots on variables away from their bounds.
inline bool grg_partition(const Matrix& j, const Vec& x, const BoxBounds& box, GrgWork& w) {
  const int m = j.rows(), n = j.cols();
  Matrix work = j;
  std::vector<bool> used(n, false);
  w.basic.clear();
  w.residual.clear();
  std::vector<int> rows_done;
  for (int step = 0; step < m; ++step) {
    int best_col = -1;
    double best_score = 0.0;
    for (int c = 0; c < n; ++c) {
      if (used[c]) continue;
      double v = std::fabs(work(step, c));
      double slack = std::min(x[c] - box.lo[c], box.hi[c] - x[c]);
      double interior = (slack > 1e-10) ? 1.0 : 1e-3;
      double score = v * interior;
      if (score > best_score) {
        best_score = score;
        best_col = c;
      }
    }
    if (best_col < 0 || best_score < 1e-14) return false;
    used[best_col] = true;
    w.basic.push_back(best_col);
    // eliminate this column from the remaining rows
    for (int r = step + 1; r < m; ++r) {
      double factor = work(r, best_col) / work(step, best_col);
      for (int c = 0; c < n; ++c) work(r, c) -= factor * work(step, c);
    }
  }
  for (int c = 0; c < n; ++c)
    if (!used[c]) w.residual.push_back(c);
  return true;
}

}  // namespace detail

// Maximize f subject to h(x) = 0 and box bounds, from a feasible start.
// Moves along the damped reduced gradient in the residual space, restores
// feasibility by Newton steps on the basic variables.
inline OptimResult grg_maximize(const ObjectiveFn& f, const GradientFn& grad,
                                const ConstraintSet& cons, const BoxBounds& box, const Vec& x0,
                                const GrgOptions& opts = {}) {
  box.validate();
  const int n = static_cast<int>(x0.size());
  const int m = cons.count;
  const double inf = std::numeric_limits<double>::infinity();

  auto hnorm = [&](const Vec& x) {
    if (m == 0) return 0.0;
    Vec h = cons.h(x);
    double s = 0.0;
    for (double v : h) s = std::max(s, std::fabs(v));
    return s;
  };

  OptimResult res;
  Vec x = box.clip(x0);

  if (opts.audit_start_jacobian && m > 0) audit_jacobian(cons, x, 1e-4);

  detail::GrgWork part;

  // Newton restoration on the basic variables; returns false on divergence.
  auto restore = [&](Vec& y) {
    if (m == 0) return true;
    for (int it = 0; it < opts.max_restoration_steps; ++it) {
      Vec h = cons.h(y);
      double hn = 0.0;
      for (double v : h) hn = std::max(hn, std::fabs(v));
      if (hn <= opts.tol_feasibility) return true;
      Matrix j = cons.jacobian(y);
      if (!detail::grg_partition(j, y, box, part)) return false;
      Matrix jb(m, m);
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) jb(r, c) = j(r, part.basic[c]);
      Vec delta;
      try {
        delta = solve(jb, h);
      } catch (const std::exception&) {
        return false;
      }
      for (int c = 0; c < m; ++c) {
        int idx = part.basic[c];
        y[idx] = std::min(std::max(y[idx] - delta[c], box.lo[idx]), box.hi[idx]);
      }
    }
    return hnorm(y) <= opts.tol_feasibility;
  };

  if (!restore(x)) {
    res.x = x;
    res.f = f(x);
    res.feasibility = hnorm(x);
    res.status = OptimStatus::RestorationFailure;
    res.message = "could not restore feasibility at the start point";
    return res;
  }

  double fx = f(x);
  int iter = 0;
  bool converged = false;
  bool failed = false;
  for (; iter < opts.max_iterations && !converged && !failed; ++iter) {
    Vec g = grad(x);
    Vec v(n, 0.0);

    if (m > 0) {
      Matrix j = cons.jacobian(x);
      if (!detail::grg_partition(j, x, box, part)) {
        res.status = OptimStatus::SingularBasis;
        res.message = "constraint Jacobian basis is singular";
        failed = true;
        break;
      }
      const int r = static_cast<int>(part.residual.size());
      Matrix jb(m, m), jr(m, r);
      for (int row = 0; row < m; ++row) {
        for (int c = 0; c < m; ++c) jb(row, c) = j(row, part.basic[c]);
        for (int c = 0; c < r; ++c) jr(row, c) = j(row, part.residual[c]);
      }
      // w' = grad_b' Jb^{-1}  (solve Jb' w = grad_b)
      Vec gb(m);
      for (int c = 0; c < m; ++c) gb[c] = g[part.basic[c]];
      Vec w;
      try {
        w = solve(jb.transpose(), gb);
      } catch (const std::exception&) {
        res.status = OptimStatus::SingularBasis;
        res.message = "singular basic Jacobian block";
        failed = true;
        break;
      }
      // reduced gradient z_c = g_r - w' Jr, damped ascent direction in v
      Vec vr(r, 0.0);
      for (int c = 0; c < r; ++c) {
        int idx = part.residual[c];
        double z = g[idx];
        for (int row = 0; row < m; ++row) z -= w[row] * jr(row, c);
        double width = box.hi[idx] - box.lo[idx];
        double eps = std::isfinite(width) ? opts.damping_fraction * width : opts.damping_fraction;
        auto damp = [&](double slack) {
          if (!std::isfinite(slack)) return 1.0;
          if (slack <= 0.0) return 0.0;
          return std::min(slack / eps, 1.0);
        };
        if (z > 0.0 && x[idx] < box.hi[idx])
          vr[c] = damp(box.hi[idx] - x[idx]) * z;
        else if (z < 0.0 && x[idx] > box.lo[idx])
          vr[c] = damp(x[idx] - box.lo[idx]) * z;
      }
      double vnorm = 0.0;
      for (double t : vr) vnorm = std::max(vnorm, std::fabs(t));
      if (vnorm <= opts.tol_reduced_gradient) {
        converged = true;
        break;
      }
      // v_b = -Jb^{-1} Jr v_r
      Vec jrv(m, 0.0);
      for (int row = 0; row < m; ++row)
        for (int c = 0; c < r; ++c) jrv[row] += jr(row, c) * vr[c];
      Vec vb = solve(jb, jrv);
      for (int c = 0; c < r; ++c) v[part.residual[c]] = vr[c];
      for (int c = 0; c < m; ++c) v[part.basic[c]] = -vb[c];
    } else {
      // box-only: damped projected gradient
      double vnorm = 0.0;
      for (int idx = 0; idx < n; ++idx) {
        double z = g[idx];
        double width = box.hi[idx] - box.lo[idx];
        double eps = std::isfinite(width) ? opts.damping_fraction * width : opts.damping_fraction;
        auto damp = [&](double slack) {
          if (!std::isfinite(slack)) return 1.0;
          if (slack <= 0.0) return 0.0;
          return std::min(slack / eps, 1.0);
        };
        if (z > 0.0 && x[idx] < box.hi[idx]) v[idx] = damp(box.hi[idx] - x[idx]) * z;
        else if (z < 0.0 && x[idx] > box.lo[idx]) v[idx] = damp(x[idx] - box.lo[idx]) * z;
        vnorm = std::max(vnorm, std::fabs(v[idx]));
      }
      if (vnorm <= opts.tol_reduced_gradient) {
        converged = true;
        break;
      }
    }

    // largest step keeping x + eta v inside the box
    double eta_max = inf;
    for (int idx = 0; idx < n; ++idx) {
      if (v[idx] > 0.0 && std::isfinite(box.hi[idx]))
        eta_max = std::min(eta_max, (box.hi[idx] - x[idx]) / v[idx]);
      else if (v[idx] < 0.0 && std::isfinite(box.lo[idx]))
        eta_max = std::min(eta_max, (box.lo[idx] - x[idx]) / v[idx]);
    }
    if (!(eta_max > 0.0)) eta_max = 0.0;
    if (!std::isfinite(eta_max)) eta_max = 1e12;

    ScalarFn phi = [&](double eta) {
      Vec y(x);
      for (int i = 0; i < n; ++i) y[i] += eta * v[i];
      return -f(box.clip(y));
    };
    ScalarFn dphi = [&](double eta) {
      Vec y(x);
      for (int i = 0; i < n; ++i) y[i] += eta * v[i];
      Vec gy = grad(box.clip(y));
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += gy[i] * v[i];
      return -s;
    };
    double eta = detail::line_min_derivative(phi, dphi, eta_max, opts.tol_line_search);
    if (eta <= 0.0) eta = std::min(1e-6, eta_max);

    bool accepted = false;
    for (int halving = 0; halving < 25; ++halving) {
      Vec y(x);
      for (int i = 0; i < n; ++i) y[i] += eta * v[i];
      y = box.clip(y);
      if (restore(y)) {
        double fy = f(y);
        if (std::isfinite(fy) && fy >= fx - 1e-14 * (1.0 + std::fabs(fx))) {
          double gain = fy - fx;
          x = y;
          fx = fy;
          accepted = true;
          // no measurable progress left at vanishing steps
          if (gain <= 1e-15 * (1.0 + std::fabs(fx)) && eta < 1e-10) converged = true;
          break;
        }
      }
      eta *= 0.5;
    }
    if (!accepted) {
      res.status = OptimStatus::RestorationFailure;
      res.message = "restoration or ascent failed after step halving";
      failed = true;
      break;
    }
  }
  if (!failed) res.status = converged ? OptimStatus::Converged : OptimStatus::MaxIterations;

  res.x = x;
  res.f = fx;
  res.feasibility = hnorm(x);
  res.iterations = iter;
  if (!failed && res.feasibility > opts.tol_feasibility) {
    res.status = OptimStatus::RestorationFailure;
    res.message = "final iterate violates the feasibility tolerance";
  }
  return res;
}

// ---- simulated annealing -----------------------------------------------

struct AnnealSchedule {
  enum class Mode { Logarithmic, Geometric };
  Mode mode = Mode::Geometric;
  double cooling_constant = 1.0;   // the "n Delta" constant: theta(t) = ln(t) / constant
  double theta0 = 0.05;            // initial inverse temperature (geometric mode)
  double factor = 1.05;            // geometric factor 1 + epsilon
  int batch_size = 200;
  double freeze_acceptance = 0.01; // geometric mode stops below this rate
  long max_steps = 200000;
};

template <class State>
struct AnnealResult {
  State best;
  double best_energy = 0.0;
  long steps = 0;
  long accepted = 0;
  double final_theta = 0.0;
};

// Metropolis inner loop: accept a move of differential delta with
// probability min(1, exp(-theta * delta)). on_step, when set, sees the
// current state after every proposal.
template <class State, class EnergyFn, class NeighborFn,
          class StepFn = std::function<void(const State&)>>
AnnealResult<State> metropolis_anneal(EnergyFn&& energy, NeighborFn&& neighbor,
                                      const AnnealSchedule& sched, State s0, Lcprg& rng,
                                      StepFn on_step = [](const State&) {}) {
  if (!(sched.factor >= 1.0)) throw std::invalid_argument("metropolis_anneal: factor must be >= 1");
  State cur = std::move(s0);
  double e_cur = energy(cur);
  if (!std::isfinite(e_cur)) throw std::invalid_argument("metropolis_anneal: non-finite initial energy");
  AnnealResult<State> out;
  out.best = cur;
  out.best_energy = e_cur;

  double theta = (sched.mode == AnnealSchedule::Mode::Geometric) ? sched.theta0 : 0.0;
  long t = 0;
  long batch_accepted = 0;
  int batch_count = 0;
  while (t < sched.max_steps) {
    ++t;
    if (sched.mode == AnnealSchedule::Mode::Logarithmic)
      theta = std::log(static_cast<double>(t) + 1.0) / sched.cooling_constant;
    State cand = neighbor(cur, rng);
    double e_cand = energy(cand);
    double delta = e_cand - e_cur;
    bool accept = delta <= 0.0 || rng.next_uniform() < std::exp(-theta * delta);
    if (accept) {
      cur = std::move(cand);
      e_cur = e_cand;
      ++out.accepted;
      ++batch_accepted;
      if (e_cur < out.best_energy) {
        out.best_energy = e_cur;
        out.best = cur;
      }
    }
    on_step(cur);
    if (++batch_count >= sched.batch_size) {
      double rate = static_cast<double>(batch_accepted) / batch_count;
      batch_accepted = 0;
      batch_count = 0;
      if (sched.mode == AnnealSchedule::Mode::Geometric) {
        theta *= sched.factor;
        if (rate < sched.freeze_acceptance) break;  // frozen
      }
    }
  }
  out.steps = t;
  out.final_theta = theta;
  return out;
}

// rho(P) = 1/2 max_{i,j} ||P_i - P_j||_1
inline double dobroushin_coefficient(const Matrix& p, double tol = 1e-12) {
  const int d = p.rows();
  if (p.cols() != d) throw std::invalid_argument("dobroushin_coefficient: matrix must be square");
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      if (p(i, j) < -tol) throw std::invalid_argument("dobroushin_coefficient: negative entry");
      s += p(i, j);
    }
    if (std::fabs(s - 1.0) > tol * d + tol)
      throw std::invalid_argument("dobroushin_coefficient: rows must sum to 1");
  }
  double best = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += std::fabs(p(i, k) - p(j, k));
      best = std::max(best, 0.5 * s);
    }
  return best;
}

// ---- Bregman minimum divergence ---------------------------------------

struct BregmanResult {
  Vec p;
  Vec multipliers;
  double residual = 0.0;
  int cycles = 0;
  bool converged = false;
};

// Minimize I(p, q) = sum p log(p/q) over {p >= 0, A p = b} by cyclic row
// fitting: each step solves the scalar equation phi(nu) = A_k p exp(nu A_k) - b_k = 0.
// The normalization row must be included in A.
inline BregmanResult bregman_minimize_divergence(const Vec& q, const Matrix& a, const Vec& b,
                                                 double tol = 1e-10, int max_cycles = 5000) {
  const int m = a.rows();
  const int n = a.cols();
  if (static_cast<int>(q.size()) != n || static_cast<int>(b.size()) != m)
    throw std::invalid_argument("bregman_minimize_divergence: shape mismatch");
  for (double v : q)
    if (!(v > 0.0)) throw std::invalid_argument("bregman_minimize_divergence: prior must be positive");

  BregmanResult out;
  out.multipliers.assign(m, 0.0);
  out.p.resize(n);
  for (int i = 0; i < n; ++i) out.p[i] = q[i] * std::exp(-1.0);

  auto row_value = [&](int k) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a(k, i) * out.p[i];
    return s;
  };
  auto residual = [&]() {
    double r = 0.0;
    for (int k = 0; k < m; ++k) r = std::max(r, std::fabs(row_value(k) - b[k]));
    return r;
  };

  double prev_res = residual();
  for (int cycle = 0; cycle < max_cycles; ++cycle) {
    for (int k = 0; k < m; ++k) {
      // phi(nu) = sum_i a_ki p_i exp(nu a_ki) - b_k, strictly increasing in nu
      auto phi = [&](double nu) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
          if (a(k, i) != 0.0) s += a(k, i) * out.p[i] * std::exp(nu * a(k, i));
        return s - b[k];
      };
      double lo = -1.0, hi = 1.0;
      int guard = 0;
      while (phi(lo) > 0.0 && guard++ < 200) lo *= 2.0;
      guard = 0;
      while (phi(hi) < 0.0 && guard++ < 200) hi *= 2.0;
      if (phi(lo) > 0.0 || phi(hi) < 0.0)
        throw std::runtime_error("bregman_minimize_divergence: row solve failed for constraint " + std::to_string(k));
      double nu = 0.0;
      for (int it = 0; it < 200; ++it) {
        nu = 0.5 * (lo + hi);
        double v = phi(nu);
        if (std::fabs(v) <= 1e-15 * (1.0 + std::fabs(b[k]))) break;
        if (v < 0.0) lo = nu; else hi = nu;
        if (hi - lo < 1e-16 * (1.0 + std::fabs(nu))) break;
      }
      for (int i = 0; i < n; ++i)
        if (a(k, i) != 0.0) out.p[i] *= std::exp(nu * a(k, i));
      out.multipliers[k] += nu;
    }
    out.cycles = cycle + 1;
    double r = residual();
    if (r <= tol) {
      out.converged = true;
      break;
    }
    if (cycle > 10 && r > 0.999999 * prev_res && r > 1e3 * tol) {
      throw std::runtime_error("bregman_minimize_divergence: stalled residual, constraints look infeasible");
    }
    prev_res = r;
  }
  out.residual = residual();
  return out;
}

}  // namespace evcore
