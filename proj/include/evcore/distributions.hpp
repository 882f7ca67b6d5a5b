#pragma once

// Log-densities, log-pmfs, normalizers and moments for the distribution
// families used by the models and tests. Everything is exposed as a log
// kernel plus explicit normalizer so surprise ratios never overflow.
//
// Support boundary convention: points outside the support return -inf
// (or the correct +inf limit for density poles); these markers are meant
// for comparisons, not further arithmetic.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "evcore/linalg.hpp"
#include "evcore/special.hpp"

namespace evcore {

using Counts = std::vector<long>;

inline void check_simplex(const Vec& theta, double tol = 1e-12) {
  double s = 0.0;
  for (double t : theta) {
    if (t < 0.0) throw std::invalid_argument("simplex vector has a negative component");
    s += t;
  }
  if (std::fabs(s - 1.0) > tol * theta.size() + tol)
    throw std::invalid_argument("simplex vector does not sum to 1");
}

inline void check_positive(const Vec& a, const char* what) {
  for (double v : a)
    if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + ": components must be positive");
}

// log B(a) = sum log Gamma(a_k) - log Gamma(1'a)
inline double log_beta_fn(const Vec& a) {
  check_positive(a, "log_beta_fn");
  double sum = 0.0, lg = 0.0;
  for (double v : a) {
    sum += v;
    lg += log_gamma(v);
  }
  return lg - log_gamma(sum);
}

inline double log_multinomial_coef(const Counts& x) {
  long n = 0;
  double lg = 0.0;
  for (long xi : x) {
    if (xi < 0) throw std::invalid_argument("counts must be non-negative");
    n += xi;
    lg += log_gamma(static_cast<double>(xi) + 1.0);
  }
  return log_gamma(static_cast<double>(n) + 1.0) - lg;
}

inline double multinomial_logpmf(const Counts& x, const Vec& theta) {
  if (x.size() != theta.size()) throw std::invalid_argument("multinomial_logpmf: size mismatch");
  check_simplex(theta);
  double lp = log_multinomial_coef(x);
  for (size_t k = 0; k < x.size(); ++k) {
    if (x[k] == 0) continue;
    if (theta[k] <= 0.0) return kNegInf;
    lp += static_cast<double>(x[k]) * std::log(theta[k]);
  }
  return lp;
}

// Vector form Hy_m(n, N, psi): prod_k C(psi_k, x_k) / C(N, n).
inline double hypergeometric_logpmf(const Counts& x, long n, long N, const Counts& psi) {
  if (x.size() != psi.size()) throw std::invalid_argument("hypergeometric_logpmf: size mismatch");
  long sx = 0, sp = 0;
  for (size_t k = 0; k < x.size(); ++k) {
    if (x[k] < 0) return kNegInf;
    if (psi[k] < 0) throw std::invalid_argument("hypergeometric_logpmf: psi must be non-negative");
    sx += x[k];
    sp += psi[k];
  }
  if (sp != N) throw std::invalid_argument("hypergeometric_logpmf: 1'psi must equal N");
  if (n < 0 || n > N) throw std::invalid_argument("hypergeometric_logpmf: need 0 <= n <= N");
  if (sx != n) return kNegInf;
  double lp = -(log_gamma(N + 1.0) - log_gamma(n + 1.0) - log_gamma(N - n + 1.0));
  for (size_t k = 0; k < x.size(); ++k) {
    if (x[k] > psi[k]) return kNegInf;
    lp += log_gamma(psi[k] + 1.0) - log_gamma(x[k] + 1.0) - log_gamma(psi[k] - x[k] + 1.0);
  }
  return lp;
}

// NB(a, theta) extended to real a > 0: Pr(x2) = Gamma(a+x2)/(x2! Gamma(a)) theta_1^a theta_2^x2.
inline double negbinomial_logpmf(long x2, double a, const Vec& theta) {
  if (theta.size() != 2) throw std::invalid_argument("negbinomial_logpmf: theta must be 2-dimensional");
  check_simplex(theta);
  if (!(a > 0.0)) throw std::invalid_argument("negbinomial_logpmf: a must be positive");
  if (x2 < 0) return kNegInf;
  return log_gamma(a + x2) - log_gamma(x2 + 1.0) - log_gamma(a) + a * std::log(theta[0]) +
         (x2 > 0 ? x2 * std::log(theta[1]) : 0.0);
}

// DM_m(n, a): B(a+x)/B(a) * C(n, x)
inline double dirichlet_multinomial_logpmf(const Counts& x, long n, const Vec& a) {
  if (x.size() != a.size()) throw std::invalid_argument("dirichlet_multinomial_logpmf: size mismatch");
  check_positive(a, "dirichlet_multinomial_logpmf");
  long sx = 0;
  for (long xi : x) {
    if (xi < 0) return kNegInf;
    sx += xi;
  }
  if (sx != n) return kNegInf;
  Vec ax(a);
  for (size_t k = 0; k < a.size(); ++k) ax[k] += static_cast<double>(x[k]);
  return log_beta_fn(ax) - log_beta_fn(a) + log_multinomial_coef(x);
}

struct Moments {
  Vec mean;
  Matrix cov;
};

inline Moments multinomial_moments(long n, const Vec& theta) {
  check_simplex(theta);
  const int m = static_cast<int>(theta.size());
  Moments mo;
  mo.mean.resize(m);
  mo.cov = Matrix(m, m);
  for (int i = 0; i < m; ++i) {
    mo.mean[i] = n * theta[i];
    for (int j = 0; j < m; ++j)
      mo.cov(i, j) = (i == j) ? n * theta[i] * (1.0 - theta[i]) : -static_cast<double>(n) * theta[i] * theta[j];
  }
  return mo;
}

inline Moments dirichlet_moments(const Vec& a) {
  check_positive(a, "dirichlet_moments");
  const int m = static_cast<int>(a.size());
  double total = 0.0;
  for (double v : a) total += v;
  Moments mo;
  mo.mean.resize(m);
  mo.cov = Matrix(m, m);
  for (int i = 0; i < m; ++i) mo.mean[i] = a[i] / total;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double d = (i == j) ? mo.mean[i] * (1.0 - mo.mean[i]) : -mo.mean[i] * mo.mean[j];
      mo.cov(i, j) = d / (total + 1.0);
    }
  return mo;
}

inline Moments dm_moments(long n, const Vec& a) {
  check_positive(a, "dm_moments");
  const int m = static_cast<int>(a.size());
  double total = 0.0;
  for (double v : a) total += v;
  Moments mo;
  mo.mean.resize(m);
  mo.cov = Matrix(m, m);
  const double factor = static_cast<double>(n) * (n + total) / (total + 1.0);
  for (int i = 0; i < m; ++i) mo.mean[i] = n * a[i] / total;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double ai = a[i] / total, aj = a[j] / total;
      mo.cov(i, j) = factor * ((i == j) ? ai * (1.0 - ai) : -ai * aj);
    }
  return mo;
}

// Di_m(a) density on the simplex, including the normalizer.
inline double dirichlet_logpdf(const Vec& y, const Vec& a) {
  if (y.size() != a.size()) throw std::invalid_argument("dirichlet_logpdf: size mismatch");
  check_positive(a, "dirichlet_logpdf");
  check_simplex(y);
  double lp = -log_beta_fn(a);
  for (size_t k = 0; k < y.size(); ++k) {
    if (y[k] == 0.0) {
      if (a[k] > 1.0) return kNegInf;
      if (a[k] < 1.0) return kPosInf;
      continue;
    }
    lp += (a[k] - 1.0) * std::log(y[k]);
  }
  return lp;
}

inline double gamma_logpdf(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("gamma_logpdf: parameters must be positive");
  if (x < 0.0) return kNegInf;
  if (x == 0.0) {
    if (a > 1.0) return kNegInf;
    if (a < 1.0) return kPosInf;
    return std::log(b);
  }
  return a * std::log(b) - log_gamma(a) + (a - 1.0) * std::log(x) - b * x;
}

// Wishart density with nu degrees of freedom and precision matrix R = V^{-1}.
inline double wishart_logpdf(const Matrix& s, double nu, const Matrix& r) {
  const int k = s.rows();
  if (s.cols() != k || r.rows() != k || r.cols() != k)
    throw std::invalid_argument("wishart_logpdf: dimension mismatch");
  if (!(nu > k - 1)) throw std::invalid_argument("wishart_logpdf: need nu > k - 1");
  Matrix ls = cholesky(s);
  Matrix lr = cholesky(r);
  double tr = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) tr += s(i, j) * r(j, i);
  double lp = 0.5 * (nu - k - 1.0) * logdet_from_factor(ls) - 0.5 * tr + 0.5 * nu * logdet_from_factor(lr);
  lp -= 0.5 * nu * k * std::log(2.0) + 0.25 * k * (k - 1.0) * std::log(M_PI);
  for (int j = 1; j <= k; ++j) lp -= log_gamma(0.5 * (nu + 1.0 - j));
  return lp;
}

// log-D2K moments: E(log z) = psi(a_{1:m}) - psi(a_{m+1}) 1,
// Cov = diag(psi'(a_{1:m})) + psi'(a_{m+1}) 1 1'.
inline Moments d2k_log_moments(const Vec& a) {
  check_positive(a, "d2k_log_moments");
  const int m = static_cast<int>(a.size()) - 1;
  if (m < 1) throw std::invalid_argument("d2k_log_moments: need at least 2 parameters");
  Moments mo;
  mo.mean.resize(m);
  mo.cov = Matrix(m, m);
  const double psi_last = digamma(a[m]);
  const double tri_last = trigamma(a[m]);
  for (int i = 0; i < m; ++i) mo.mean[i] = digamma(a[i]) - psi_last;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) mo.cov(i, j) = tri_last + ((i == j) ? trigamma(a[i]) : 0.0);
  return mo;
}

struct WeibullParams {
  double alpha = 0.0;  // threshold (time units)
  double beta = 1.0;   // shape
  double gamma = 1.0;  // characteristic life
};

struct HazardFns {
  double hazard;
  double reliability;
  double density;
};

// Three-parameter truncated Weibull; alpha = 0 gives the plain W2 forms.
inline HazardFns weibull_fns(double t, const WeibullParams& p) {
  if (t < 0.0) throw std::invalid_argument("weibull_fns: time must be non-negative");
  if (p.alpha < 0.0 || !(p.beta > 0.0) || !(p.gamma > 0.0))
    throw std::invalid_argument("weibull_fns: invalid parameters");
  const double z = (t + p.alpha) / p.gamma;
  const double z0 = p.alpha / p.gamma;
  const double r0 = std::exp(-std::pow(z0, p.beta));
  HazardFns f;
  f.reliability = std::exp(-std::pow(z, p.beta)) / r0;
  f.hazard = (t + p.alpha == 0.0) ? (p.beta < 1.0 ? kPosInf : (p.beta == 1.0 ? 1.0 / p.gamma : 0.0))
                                  : p.beta * std::pow(t + p.alpha, p.beta - 1.0) / std::pow(p.gamma, p.beta);
  f.density = f.hazard * f.reliability;
  return f;
}

// h(x) = lambda alpha^x, r(x) = exp(-(lambda/log alpha)(alpha^x - 1)).
inline HazardFns gompertz_fns(double t, double alpha, double lambda) {
  if (t < 0.0) throw std::invalid_argument("gompertz_fns: time must be non-negative");
  if (!(alpha > 0.0) || !(lambda > 0.0)) throw std::invalid_argument("gompertz_fns: invalid parameters");
  HazardFns f;
  f.hazard = lambda * std::pow(alpha, t);
  if (alpha == 1.0) {
    f.reliability = std::exp(-lambda * t);
  } else {
    f.reliability = std::exp(-(lambda / std::log(alpha)) * (std::pow(alpha, t) - 1.0));
  }
  f.density = f.hazard * f.reliability;
  return f;
}

// Unnormalized Jeffreys log-prior for the multinomial: -1/2 sum log theta_k.
inline double jeffreys_multinomial_logprior(const Vec& theta) {
  check_simplex(theta);
  double lp = 0.0;
  for (double t : theta) {
    if (t == 0.0) return kPosInf;
    lp -= 0.5 * std::log(t);
  }
  return lp;
}

namespace detail {
inline double log_binom(long n, long k) {
  return log_gamma(n + 1.0) - log_gamma(k + 1.0) - log_gamma(n - k + 1.0);
}
}  // namespace detail

// BF for homogeneity in a 2x2 table: x successes out of m vs y out of n.
inline double bayes_factor_homogeneity(long x, long m, long y, long n) {
  if (x < 0 || y < 0 || x > m || y > n) throw std::invalid_argument("bayes_factor_homogeneity: invalid counts");
  double lbf = detail::log_binom(m, x) + detail::log_binom(n, y) - detail::log_binom(m + n, x + y);
  return std::exp(lbf) * (m + 1.0) * (n + 1.0) / (m + n + 1.0);
}

// BF for independence in a 2x2 table with cells (x00, x01; x10, x11).
inline double bayes_factor_independence(long x00, long x01, long x10, long x11) {
  if (x00 < 0 || x01 < 0 || x10 < 0 || x11 < 0)
    throw std::invalid_argument("bayes_factor_independence: invalid counts");
  const long n = x00 + x01 + x10 + x11;
  const long r0 = x00 + x01, r1 = x10 + x11, c0 = x00 + x10;
  const double P = static_cast<double>(r0) / (n + 2.0);
  const double Q = static_cast<double>(c0) / (n + 2.0);
  double lbf = detail::log_binom(r0, x00) + detail::log_binom(r1, x11) - detail::log_binom(n, c0);
  double factor = (n + 2.0) * ((n + 3.0) - (n + 2.0) * (P * (1.0 - P) + Q * (1.0 - Q))) / (4.0 * (n + 1.0));
  return std::exp(lbf) * factor;
}

struct NormalWishartParams {
  double n_pseudo = 0.0;  // pseudo-count
  double dof = 0.0;       // Wishart degrees of freedom
  Vec mean;               // location hyperparameter
  Matrix scatter;         // scatter hyperparameter
};

}  // namespace evcore
