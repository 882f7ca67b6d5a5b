#pragma once

// Special functions: log-gamma, digamma, trigamma, regularized incomplete
// gamma and its inverse, chi-square CDF/quantile, and the QQ consistency map.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace evcore {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

inline double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: argument must be positive");
  return std::lgamma(x);
}

// psi(x) by upward recurrence into the asymptotic region; both series keep
// Bernoulli terms through x^{-12}, good to ~1e-13 relative past x = 12.
inline double digamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("digamma: argument must be positive");
  double acc = 0.0;
  while (x < 12.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x, inv2 = inv * inv;
  // ln x - 1/2x - sum B_2n / (2n x^2n)
  double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
  return acc + std::log(x) - 0.5 * inv - series;
}

inline double trigamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("trigamma: argument must be positive");
  double acc = 0.0;
  while (x < 12.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x, inv2 = inv * inv;
  double series =
      1.0 + inv * 0.5 +
      inv2 * (1.0 / 6.0 -
              inv2 * (1.0 / 30.0 -
                      inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0))))));
  return acc + inv * series;
}

namespace detail {

// Series expansion of P(a,x), valid for x < a+1.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a,x) = 1 - P(a,x), valid for x >= a+1 (Lentz).
inline double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

// Regularized lower incomplete gamma P(a,x) = gamma(a,x)/Gamma(a).
inline double reg_lower_gamma(double a, double x) {
  if (!(a > 0.0)) throw std::domain_error("reg_lower_gamma: a must be positive");
  if (x < 0.0) throw std::domain_error("reg_lower_gamma: x must be non-negative");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_contfrac(a, x);
}

// Chi-square CDF with k degrees of freedom: Q(k, x) in the paper's notation.
inline double chi2_cdf(double k, double x) {
  if (x <= 0.0) return 0.0;
  return reg_lower_gamma(0.5 * k, 0.5 * x);
}

// Inverse of chi2_cdf in x, bisection tightened by secant steps.
inline double chi2_quantile(double k, double p) {
  if (!(k > 0.0)) throw std::domain_error("chi2_quantile: dof must be positive");
  if (p < 0.0 || p > 1.0) throw std::domain_error("chi2_quantile: p outside [0,1]");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return kPosInf;
  double lo = 0.0, hi = k + 1.0;
  while (chi2_cdf(k, hi) < p) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double fm = chi2_cdf(k, mid) - p;
    if (fm < 0.0) lo = mid; else hi = mid;
    if (hi - lo < 1e-13 * (1.0 + hi)) break;
  }
  // secant polish
  double x0 = lo, x1 = hi;
  double f0 = chi2_cdf(k, x0) - p, f1 = chi2_cdf(k, x1) - p;
  for (int it = 0; it < 8 && f1 != f0; ++it) {
    double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
    if (!(x2 > 0.0) || !std::isfinite(x2)) break;
    x0 = x1; f0 = f1;
    x1 = x2; f1 = chi2_cdf(k, x1) - p;
  }
  return x1;
}

// QQ(t, h, c) = Q(t-h, Q^{-1}(t, c)): maps the e-value against H through the
// asymptotic chi-square pair so that sev is uniform under a true hypothesis.
inline double qq_map(double t, double h, double c) {
  if (!(t > h) || h < 0.0) throw std::domain_error("qq_map: need t > h >= 0");
  if (c <= 0.0) return 0.0;
  if (c >= 1.0) return 1.0;
  return chi2_cdf(t - h, chi2_quantile(t, c));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace evcore
