#pragma once

// The model zoo: concrete ModelSpec/HypothesisSpec constructors with
// analytic kernels, constraints and gradients for each worked example.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "evcore/distributions.hpp"
#include "evcore/fbst.hpp"

namespace evcore {

struct ModelBundle {
  ModelSpec model;
  HypothesisSpec hyp;
};

// ---- coefficient of variation ----------------------------------------------

struct CvSufficientStats {
  long n = 0;
  double mean = 0.0;
  double ss = 0.0;  // sum of squared deviations

  // std is the n-denominator standard deviation, so ss = n std^2
  static CvSufficientStats from_std(long n, double mean, double std_dev) {
    return {n, mean, n * std_dev * std_dev};
  }
};

// X ~ N(beta, sigma), H: sigma/beta = c. Coordinates (beta, rho = 1/sigma^2);
// joint kernel sqrt(rho) exp(-n rho (beta - xbar)^2 / 2) rho^{(n-2)/2} exp(-rho s / 2)
// with the uniform reference. The constraint is written rho beta^2 c^2 = 1.
inline ModelBundle cv_model(const CvSufficientStats& stats, double c) {
  if (stats.n < 2) throw std::invalid_argument("cv_model: need n >= 2");
  if (!(stats.ss > 0.0)) throw std::invalid_argument("cv_model: degenerate sample, s = 0");
  if (!(c > 0.0)) throw std::invalid_argument("cv_model: need c > 0");
  const double n = static_cast<double>(stats.n);
  const double xbar = stats.mean;
  const double s = stats.ss;

  ModelBundle b;
  b.model.name = "cv";
  b.model.dim = 2;
  b.model.t = 2;
  b.model.box.lo = {-kPosInf, 1e-12};
  b.model.box.hi = {kPosInf, kPosInf};
  b.model.log_posterior = [n, xbar, s](const Vec& th) {
    const double beta = th[0], rho = th[1];
    if (!(rho > 0.0)) return kNegInf;
    return 0.5 * (n - 1.0) * std::log(rho) - 0.5 * n * rho * (beta - xbar) * (beta - xbar) - 0.5 * rho * s;
  };
  b.model.log_reference = [](const Vec&) { return 0.0; };
  b.model.grad_log_surprise = [n, xbar, s](const Vec& th) {
    const double beta = th[0], rho = th[1];
    Vec g(2);
    g[0] = -n * rho * (beta - xbar);
    g[1] = 0.5 * (n - 1.0) / rho - 0.5 * n * (beta - xbar) * (beta - xbar) - 0.5 * s;
    return g;
  };
  b.model.exact_sampler = [n, xbar, s](Lcprg& rng) {
    const double rho = sample_gamma(rng, 0.5 * n) / (0.5 * s);
    const double beta = xbar + sample_normal_pair(rng).first / std::sqrt(n * rho);
    return Vec{beta, rho};
  };
  b.model.start = {xbar, (n - 1.0) / s};

  b.hyp.h_dim = 1;
  b.hyp.constraints.count = 1;
  b.hyp.constraints.h = [c](const Vec& th) { return Vec{th[1] * th[0] * th[0] * c * c - 1.0}; };
  b.hyp.constraints.jacobian = [c](const Vec& th) {
    Matrix j(1, 2);
    j(0, 0) = 2.0 * th[1] * th[0] * c * c;
    j(0, 1) = th[0] * th[0] * c * c;
    return j;
  };
  b.hyp.start = {xbar, 1.0 / (c * c * xbar * xbar)};
  return b;
}

// The same model in (log beta, log sigma) coordinates with Jacobian-corrected
// kernels; the surprise function is unchanged pointwise, which is what makes
// the e-value reparameterization invariant.
inline ModelBundle cv_model_log_coords(const CvSufficientStats& stats, double c) {
  ModelBundle base = cv_model(stats, c);
  const long n = stats.n;
  const double xbar = stats.mean;
  const double s = stats.ss;
  if (!(xbar > 0.0)) throw std::invalid_argument("cv_model_log_coords: needs a positive mean");

  auto to_native = [](const Vec& w) {
    const double beta = std::exp(w[0]);
    const double rho = std::exp(-2.0 * w[1]);
    return Vec{beta, rho};
  };
  // |d(beta, rho)/d(w1, w2)| = 2 beta rho
  auto log_jac = [to_native](const Vec& w) {
    Vec th = to_native(w);
    return std::log(2.0) + std::log(th[0]) + std::log(th[1]);
  };

  ModelBundle b;
  const ModelSpec native = base.model;
  b.model.name = "cv-log";
  b.model.dim = 2;
  b.model.t = 2;
  b.model.box = BoxBounds::unbounded(2);
  b.model.log_posterior = [native, to_native, log_jac](const Vec& w) {
    return native.log_posterior(to_native(w)) + log_jac(w);
  };
  b.model.log_reference = [log_jac](const Vec& w) { return log_jac(w); };
  b.model.exact_sampler = [nn = static_cast<double>(n), xbar, s](Lcprg& rng) {
    double rho = sample_gamma(rng, 0.5 * nn) / (0.5 * s);
    double beta = xbar + sample_normal_pair(rng).first / std::sqrt(nn * rho);
    while (!(beta > 0.0)) beta = xbar + sample_normal_pair(rng).first / std::sqrt(nn * rho);
    return Vec{std::log(beta), -0.5 * std::log(rho)};
  };
  b.model.start = {std::log(xbar), 0.5 * std::log(s / (n - 1.0))};

  // H: log sigma - log beta = log c
  const double log_c = std::log(c);
  b.hyp.h_dim = 1;
  b.hyp.constraints.count = 1;
  b.hyp.constraints.h = [log_c](const Vec& w) { return Vec{w[1] - w[0] - log_c}; };
  b.hyp.constraints.jacobian = [](const Vec&) {
    Matrix j(1, 2);
    j(0, 0) = -1.0;
    j(0, 1) = 1.0;
    return j;
  };
  b.hyp.start = {std::log(xbar), std::log(c * xbar)};
  return b;
}

// ---- Hardy-Weinberg ---------------------------------------------------------

enum class ReferenceChoice { Uniform, MaxEnt, Jeffreys, Custom };

inline Vec reference_counts(ReferenceChoice ref, int m, const Vec& custom = {}) {
  switch (ref) {
    case ReferenceChoice::Uniform: return Vec(m, 1.0);
    case ReferenceChoice::MaxEnt: return Vec(m, 0.0);
    case ReferenceChoice::Jeffreys: return Vec(m, 0.5);
    case ReferenceChoice::Custom:
      if (static_cast<int>(custom.size()) != m)
        throw std::invalid_argument("reference_counts: custom counts have the wrong length");
      return custom;
  }
  throw std::invalid_argument("reference_counts: unknown choice");
}

// Trinomial posterior theta^(x + y - 1) on the 2-simplex in singular
// coordinates, H: theta_3 = (1 - sqrt(theta_1))^2. The reference density is
// theta^(yref - 1) for the chosen pseudo-count vector.
inline ModelBundle hardy_weinberg_model(const Counts& x, const Vec& prior_counts,
                                        const Vec& ref_counts) {
  if (x.size() != 3 || prior_counts.size() != 3 || ref_counts.size() != 3)
    throw std::invalid_argument("hardy_weinberg_model: trinomial inputs required");
  Vec post(3);
  long n = 0;
  for (int k = 0; k < 3; ++k) {
    if (x[k] < 0) throw std::invalid_argument("hardy_weinberg_model: negative count");
    n += x[k];
    post[k] = static_cast<double>(x[k]) + prior_counts[k];
    if (!(post[k] > 0.0))
      throw std::invalid_argument(
          "hardy_weinberg_model: improper posterior kernel at the boundary (zero count with this prior)");
  }

  ModelBundle b;
  b.model.name = "hardy-weinberg";
  b.model.dim = 3;
  b.model.t = 2;  // intrinsic simplex dimension
  b.model.box.lo = Vec(3, 1e-9);
  b.model.box.hi = Vec(3, 1.0);
  b.model.log_posterior = [post](const Vec& th) {
    double lp = 0.0;
    for (int k = 0; k < 3; ++k) {
      if (!(th[k] > 0.0)) return kNegInf;
      lp += (post[k] - 1.0) * std::log(th[k]);
    }
    return lp;
  };
  b.model.log_reference = [ref_counts](const Vec& th) {
    double lr = 0.0;
    for (int k = 0; k < 3; ++k) {
      if (!(th[k] > 0.0)) return kNegInf;
      lr += (ref_counts[k] - 1.0) * std::log(th[k]);
    }
    return lr;
  };
  b.model.grad_log_surprise = [post, ref_counts](const Vec& th) {
    Vec g(3);
    for (int k = 0; k < 3; ++k) g[k] = (post[k] - ref_counts[k]) / th[k];
    return g;
  };
  b.model.domain.count = 1;
  b.model.domain.h = [](const Vec& th) { return Vec{th[0] + th[1] + th[2] - 1.0}; };
  b.model.domain.jacobian = [](const Vec&) {
    Matrix j(1, 3);
    j(0, 0) = j(0, 1) = j(0, 2) = 1.0;
    return j;
  };
  b.model.exact_sampler = [post](Lcprg& rng) { return sample_dirichlet(rng, post); };
  {
    double tot = post[0] + post[1] + post[2];
    b.model.start = {post[0] / tot, post[1] / tot, post[2] / tot};
  }
  b.model.quasi = QuasiMap{2, [lp = b.model.log_posterior](const Vec& u) {
                             Vec th{u[0], 1.0 - u[0] - u[1], u[1]};
                             if (th[1] <= 0.0) return std::make_pair(th, kNegInf);
                             return std::make_pair(th, lp(th));
                           }};

  b.hyp.h_dim = 1;
  b.hyp.constraints.count = 1;
  b.hyp.constraints.h = [](const Vec& th) {
    double r = 1.0 - std::sqrt(th[0]);
    return Vec{th[2] - r * r};
  };
  b.hyp.constraints.jacobian = [](const Vec& th) {
    Matrix j(1, 3);
    double sq = std::sqrt(th[0]);
    j(0, 0) = (1.0 - sq) / sq;
    j(0, 1) = 0.0;
    j(0, 2) = 1.0;
    return j;
  };
  {
    // allele frequency start on H
    double p = (2.0 * x[0] + x[1] + 1.0) / (2.0 * n + 2.0);
    p = std::min(std::max(p, 1e-3), 1.0 - 1e-3);
    b.hyp.start = {p * p, 2.0 * p * (1.0 - p), (1.0 - p) * (1.0 - p)};
  }
  return b;
}

inline ModelBundle hardy_weinberg_model(const Counts& x, const Vec& prior_counts,
                                        ReferenceChoice ref, const Vec& custom_ref = {}) {
  return hardy_weinberg_model(x, prior_counts, reference_counts(ref, 3, custom_ref));
}

// ---- 2x2 contingency tables -------------------------------------------------

enum class ContingencyKind { Homogeneity, Independence };

struct ContingencyBundle {
  ModelSpec model;
  HypothesisSpec hyp;
  double bayes_factor = 0.0;
};

// Homogeneity: x successes of m and y of n, theta = (theta1..theta4) on the
// product of two 1-simplices, H: theta1 = theta3.
// Independence: counts (x00, x01, x10, x11) on the 3-simplex,
// H: theta00 = theta0. * theta.0.
inline ContingencyBundle contingency_2x2_models(long a, long b_, long c, long d,
                                                ContingencyKind kind) {
  if (a < 0 || b_ < 0 || c < 0 || d < 0)
    throw std::invalid_argument("contingency_2x2_models: negative counts");
  ContingencyBundle out;
  Vec expo{static_cast<double>(a), static_cast<double>(b_), static_cast<double>(c),
           static_cast<double>(d)};

  out.model.dim = 4;
  out.model.box.lo = Vec(4, 1e-9);
  out.model.box.hi = Vec(4, 1.0);
  out.model.log_posterior = [expo](const Vec& th) {
    double lp = 0.0;
    for (int k = 0; k < 4; ++k) {
      if (!(th[k] > 0.0)) return kNegInf;
      lp += expo[k] * std::log(th[k]);
    }
    return lp;
  };
  out.model.log_reference = [](const Vec&) { return 0.0; };
  out.model.grad_log_surprise = [expo](const Vec& th) {
    Vec g(4);
    for (int k = 0; k < 4; ++k) g[k] = expo[k] / th[k];
    return g;
  };

  if (kind == ContingencyKind::Homogeneity) {
    out.model.name = "contingency-homogeneity";
    out.model.t = 2;
    out.model.domain.count = 2;
    out.model.domain.h = [](const Vec& th) { return Vec{th[0] + th[1] - 1.0, th[2] + th[3] - 1.0}; };
    out.model.domain.jacobian = [](const Vec&) {
      Matrix j(2, 4);
      j(0, 0) = j(0, 1) = 1.0;
      j(1, 2) = j(1, 3) = 1.0;
      return j;
    };
    out.model.exact_sampler = [expo](Lcprg& rng) {
      Vec p = sample_dirichlet(rng, {expo[0] + 1.0, expo[1] + 1.0});
      Vec q = sample_dirichlet(rng, {expo[2] + 1.0, expo[3] + 1.0});
      return Vec{p[0], p[1], q[0], q[1]};
    };
    {
      double p1 = (a + 1.0) / (a + b_ + 2.0), p2 = (c + 1.0) / (c + d + 2.0);
      out.model.start = {p1, 1.0 - p1, p2, 1.0 - p2};
    }
    out.hyp.h_dim = 1;
    out.hyp.constraints.count = 1;
    out.hyp.constraints.h = [](const Vec& th) { return Vec{th[0] - th[2]}; };
    out.hyp.constraints.jacobian = [](const Vec&) {
      Matrix j(1, 4);
      j(0, 0) = 1.0;
      j(0, 2) = -1.0;
      return j;
    };
    {
      double pooled = (a + c + 1.0) / (a + b_ + c + d + 2.0);
      out.hyp.start = {pooled, 1.0 - pooled, pooled, 1.0 - pooled};
    }
    out.bayes_factor = bayes_factor_homogeneity(a, a + b_, c, c + d);
  } else {
    out.model.name = "contingency-independence";
    out.model.t = 3;
    out.model.domain.count = 1;
    out.model.domain.h = [](const Vec& th) { return Vec{th[0] + th[1] + th[2] + th[3] - 1.0}; };
    out.model.domain.jacobian = [](const Vec&) {
      Matrix j(1, 4);
      for (int k = 0; k < 4; ++k) j(0, k) = 1.0;
      return j;
    };
    out.model.exact_sampler = [expo](Lcprg& rng) {
      return sample_dirichlet(rng, {expo[0] + 1.0, expo[1] + 1.0, expo[2] + 1.0, expo[3] + 1.0});
    };
    {
      double tot = a + b_ + c + d + 4.0;
      out.model.start = {(a + 1.0) / tot, (b_ + 1.0) / tot, (c + 1.0) / tot, (d + 1.0) / tot};
    }
    out.hyp.h_dim = 2;
    out.hyp.constraints.count = 1;
    out.hyp.constraints.h = [](const Vec& th) {
      return Vec{th[0] - (th[0] + th[1]) * (th[0] + th[2])};
    };
    out.hyp.constraints.jacobian = [](const Vec& th) {
      Matrix j(1, 4);
      double row = th[0] + th[1], col = th[0] + th[2];
      j(0, 0) = 1.0 - row - col;
      j(0, 1) = -col;
      j(0, 2) = -row;
      j(0, 3) = 0.0;
      return j;
    };
    {
      double n = a + b_ + c + d;
      double row = (a + b_ + 1.0) / (n + 2.0), col = (a + c + 1.0) / (n + 2.0);
      out.hyp.start = {row * col, row * (1.0 - col), (1.0 - row) * col, (1.0 - row) * (1.0 - col)};
    }
    out.bayes_factor = bayes_factor_independence(a, b_, c, d);
  }
  return out;
}

// ---- Weibull wearout ----------------------------------------------------

struct WearoutData {
  Vec failures;     // recorded failure times, > 0
  Vec withdrawals;  // censoring times, > 0
  double rho = 0.5; // used-time over mean-life ratio under test
  double beta_lo = 3.0;
  double beta_hi = 4.0;
};

namespace detail {

struct WeibullTerms {
  double a_pow;  // ((t+alpha)/gamma)^beta
  double b_pow;  // (alpha/gamma)^beta
};

inline WeibullTerms weibull_terms(double t, double alpha, double beta, double gamma) {
  return {std::pow((t + alpha) / gamma, beta), alpha > 0.0 ? std::pow(alpha / gamma, beta) : 0.0};
}

}  // namespace detail

// Truncated-Weibull wearout test: theta = (alpha, beta, gamma) with a flat
// prior on the box, H: alpha = rho gamma Gamma(1 + 1/beta).
inline ModelBundle weibull_wearout_model(const WearoutData& data) {
  if (data.failures.empty() && data.withdrawals.empty())
    throw std::invalid_argument("weibull_wearout_model: empty data");
  for (double t : data.failures)
    if (!(t > 0.0)) throw std::invalid_argument("weibull_wearout_model: failure times must be positive");
  for (double t : data.withdrawals)
    if (!(t > 0.0)) throw std::invalid_argument("weibull_wearout_model: withdrawal times must be positive");
  if (data.rho < 0.0) throw std::invalid_argument("weibull_wearout_model: rho must be non-negative");
  if (!(data.beta_lo >= 1.0 && data.beta_hi > data.beta_lo))
    throw std::invalid_argument("weibull_wearout_model: need 1 <= beta_lo < beta_hi");

  const Vec tf = data.failures, tw = data.withdrawals;
  const double rho = data.rho;

  ModelBundle b;
  b.model.name = "weibull-wearout";
  b.model.dim = 3;
  b.model.t = 3;
  b.model.box.lo = {0.0, data.beta_lo, 1e-9};
  b.model.box.hi = {kPosInf, data.beta_hi, kPosInf};
  b.model.log_posterior = [tf, tw](const Vec& th) {
    const double alpha = th[0], beta = th[1], gamma = th[2];
    if (alpha < 0.0 || !(beta > 0.0) || !(gamma > 0.0)) return kNegInf;
    double fl = 0.0;
    for (double t : tf) {
      auto w = detail::weibull_terms(t, alpha, beta, gamma);
      fl += std::log(beta) + (beta - 1.0) * std::log(t + alpha) - beta * std::log(gamma) - w.a_pow + w.b_pow;
    }
    for (double t : tw) {
      auto w = detail::weibull_terms(t, alpha, beta, gamma);
      fl += -w.a_pow + w.b_pow;
    }
    return fl;
  };
  b.model.log_reference = [](const Vec&) { return 0.0; };
  b.model.grad_log_surprise = [tf, tw](const Vec& th) {
    const double alpha = th[0], beta = th[1], gamma = th[2];
    Vec g(3, 0.0);
    auto b_over_alpha = [&](double) {
      // (alpha/gamma)^beta * beta / alpha -> beta alpha^{beta-1} / gamma^beta
      if (alpha <= 0.0) return beta > 1.0 ? 0.0 : (beta == 1.0 ? 1.0 / gamma : kPosInf);
      return std::pow(alpha / gamma, beta) * beta / alpha;
    };
    auto b_log = [&]() {
      if (alpha <= 0.0) return 0.0;  // (alpha/gamma)^beta log(alpha/gamma) -> 0 as alpha -> 0
      return std::pow(alpha / gamma, beta) * std::log(alpha / gamma);
    };
    for (double t : tf) {
      auto w = detail::weibull_terms(t, alpha, beta, gamma);
      g[0] += (beta - 1.0) / (t + alpha) - w.a_pow * beta / (t + alpha) + b_over_alpha(t);
      g[1] += 1.0 / beta + std::log(t + alpha) - std::log(gamma) -
              w.a_pow * std::log((t + alpha) / gamma) + b_log();
      g[2] += -beta / gamma + w.a_pow * beta / gamma - w.b_pow * beta / gamma;
    }
    for (double t : tw) {
      auto w = detail::weibull_terms(t, alpha, beta, gamma);
      g[0] += -w.a_pow * beta / (t + alpha) + b_over_alpha(t);
      g[1] += -w.a_pow * std::log((t + alpha) / gamma) + b_log();
      g[2] += w.a_pow * beta / gamma - w.b_pow * beta / gamma;
    }
    return g;
  };

  b.hyp.h_dim = 2;
  b.hyp.constraints.count = 1;
  b.hyp.constraints.h = [rho](const Vec& th) {
    return Vec{rho * th[2] * std::exp(log_gamma(1.0 + 1.0 / th[1])) - th[0]};
  };
  b.hyp.constraints.jacobian = [rho](const Vec& th) {
    const double beta = th[1], gamma = th[2];
    const double gm = std::exp(log_gamma(1.0 + 1.0 / beta));
    Matrix j(1, 3);
    j(0, 0) = -1.0;
    j(0, 1) = -rho * gamma * gm * digamma(1.0 + 1.0 / beta) / (beta * beta);
    j(0, 2) = rho * gm;
    return j;
  };

  // data-driven interior start
  double tbar = 0.0;
  long cnt = 0;
  for (double t : tf) { tbar += t; ++cnt; }
  for (double t : tw) { tbar += t; ++cnt; }
  tbar /= cnt;
  const double beta0 = 0.5 * (data.beta_lo + data.beta_hi);
  const double gm0 = std::exp(log_gamma(1.0 + 1.0 / beta0));
  b.model.start = {0.5 * rho * tbar + 1e-3, beta0, tbar / gm0};
  b.hyp.start = {rho * (tbar / gm0) * gm0, beta0, tbar / gm0};
  return b;
}

// ---- dose equivalence -----------------------------------------------------

// Index map of the 10 covariance coordinates into the 4x4 symmetric V.
inline Matrix dose_v_of_gamma(const Vec& th) {
  Matrix v(4, 4);
  v(0, 0) = th[0];
  v(1, 1) = th[1];
  v(2, 2) = th[2];
  v(3, 3) = th[3];
  v(0, 1) = v(1, 0) = th[4];
  v(2, 3) = v(3, 2) = th[5];
  v(0, 2) = v(2, 0) = th[6];
  v(0, 3) = v(3, 0) = th[7];
  v(1, 2) = v(2, 1) = th[8];
  v(1, 3) = v(3, 1) = th[9];
  return v;
}

inline std::pair<int, int> dose_gamma_position(int h) {
  switch (h) {
    case 0: return {0, 0};
    case 1: return {1, 1};
    case 2: return {2, 2};
    case 3: return {3, 3};
    case 4: return {0, 1};
    case 5: return {2, 3};
    case 6: return {0, 2};
    case 7: return {0, 3};
    case 8: return {1, 2};
    case 9: return {1, 3};
  }
  throw std::invalid_argument("dose_gamma_position: index out of range");
}

struct DoseStats {
  long n = 0;
  Vec xbar;    // 4
  Matrix s;    // 4x4 scatter (sum of outer products around the mean)
};

inline DoseStats dose_stats_from_observations(const std::vector<Vec>& obs) {
  if (obs.size() < 5) throw std::invalid_argument("dose_stats: need more than 4 observations");
  DoseStats st;
  st.n = static_cast<long>(obs.size());
  st.xbar.assign(4, 0.0);
  for (const Vec& o : obs) {
    if (o.size() != 4) throw std::invalid_argument("dose_stats: observations must be 4-dimensional");
    for (int i = 0; i < 4; ++i) st.xbar[i] += o[i];
  }
  for (int i = 0; i < 4; ++i) st.xbar[i] /= st.n;
  st.s = Matrix(4, 4);
  for (const Vec& o : obs)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) st.s(i, j) += (o[i] - st.xbar[i]) * (o[j] - st.xbar[j]);
  return st;
}

// Dose-equivalence test on the 15-dimensional extended space
// theta = [gamma(10), beta(4), delta] with the 5-constraint system
//   delta^2 g1 - g3, delta^2 g2 - g4, delta^2 g5 - g6,
//   delta b1 - b3, delta b2 - b4.
// The Normal-Wishart surprise kernel (non-informative prior) is
//   (a+n+1)/2 log|R| - 1/2 tr(R S..) - n../2 (b - b..)' R (b - b..),
// maximized under a proximal centralization term c n frob2(V - C) that is
// relaxed geometrically to zero.
inline ModelBundle dose_equivalence_model(const DoseStats& stats,
                                          const NormalWishartParams& prior = {},
                                          const GrgOptions& grg = {}) {
  const int k = 4;
  NormalWishartParams post;
  {
    const double nn = static_cast<double>(stats.n);
    const double np = prior.n_pseudo;
    post.n_pseudo = np + nn;
    post.dof = prior.dof + nn;
    post.mean.assign(4, 0.0);
    Vec pm = prior.mean.empty() ? Vec(4, 0.0) : prior.mean;
    for (int i = 0; i < 4; ++i) post.mean[i] = (nn * stats.xbar[i] + np * pm[i]) / post.n_pseudo;
    Matrix ps = (prior.scatter.rows() == 4) ? prior.scatter : Matrix(4, 4);
    post.scatter = Matrix(4, 4);
    const double shrink = (np > 0.0) ? nn * np / (nn + np) : 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        post.scatter(i, j) = stats.s(i, j) + ps(i, j) +
                             shrink * (pm[i] - stats.xbar[i]) * (pm[j] - stats.xbar[j]);
  }
  const double ndd = post.n_pseudo;
  const double coeff = 0.5 * (post.dof + 1.0);  // (a + n + 1)/2 on log|R|
  const Matrix sdd = post.scatter;
  const Vec bdd = post.mean;

  auto log_surprise_parts = [coeff, sdd, bdd, ndd](const Vec& th) -> double {
    Matrix v = dose_v_of_gamma(th);
    Matrix l;
    try {
      l = cholesky(v);
    } catch (const NotPositiveDefinite&) {
      return kNegInf;
    }
    Matrix r = invert(v);
    double logdet_r = -logdet_from_factor(l);
    double tr = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) tr += r(i, j) * sdd(j, i);
    Vec diff(4);
    for (int i = 0; i < 4; ++i) diff[i] = th[10 + i] - bdd[i];
    double quad = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) quad += diff[i] * r(i, j) * diff[j];
    return coeff * logdet_r - 0.5 * tr - 0.5 * ndd * quad;
  };

  auto grad_log_surprise = [coeff, sdd, bdd, ndd](const Vec& th) -> Vec {
    Matrix v = dose_v_of_gamma(th);
    Matrix r = invert(v);
    Vec diff(4);
    for (int i = 0; i < 4; ++i) diff[i] = th[10 + i] - bdd[i];
    Vec rdiff = r.mul(diff);
    Vec g(15, 0.0);
    for (int h = 0; h < 10; ++h) {
      auto [i, j] = dose_gamma_position(h);
      // P{h} = R G{h}, Q{h} = P{h} R with G{h} the symmetric basis matrix
      double tr_p = (i == j) ? r(i, i) : 2.0 * r(i, j);
      double tr_qs = 0.0;
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q) {
          double qh = (i == j) ? r(p, i) * r(i, q) : r(p, i) * r(j, q) + r(p, j) * r(i, q);
          tr_qs += qh * sdd(q, p);
        }
      double quad = (i == j) ? rdiff[i] * rdiff[i] : 2.0 * rdiff[i] * rdiff[j];
      g[h] = -coeff * tr_p + 0.5 * tr_qs + 0.5 * ndd * quad;
    }
    for (int i = 0; i < 4; ++i) g[10 + i] = -ndd * rdiff[i];
    g[14] = 0.0;
    return g;
  };

  ModelBundle b;
  b.model.name = "dose-equivalence";
  b.model.dim = 15;
  b.model.t = 15;
  b.model.box = BoxBounds::unbounded(15);
  for (int i = 0; i < 4; ++i) b.model.box.lo[i] = 1e-9;  // diagonal covariance coordinates
  b.model.box.lo[14] = 1e-6;                             // dose coefficient stays positive
  b.model.log_posterior = [log_surprise_parts, k](const Vec& th) {
    // posterior kernel = surprise kernel * |R|^{-(k+1)/2}
    double ls = log_surprise_parts(th);
    if (ls == kNegInf) return kNegInf;
    Matrix v = dose_v_of_gamma(th);
    double logdet_v = logdet_from_factor(cholesky(v));
    return ls + 0.5 * (k + 1.0) * logdet_v;
  };
  b.model.log_reference = [k](const Vec& th) {
    Matrix v = dose_v_of_gamma(th);
    Matrix l;
    try {
      l = cholesky(v);
    } catch (const NotPositiveDefinite&) {
      return kNegInf;
    }
    return 0.5 * (k + 1.0) * logdet_from_factor(l);
  };
  b.model.grad_log_surprise = grad_log_surprise;

  // exact Normal-Wishart sampler: R ~ Wishart(dof, S..^{-1}), beta | R ~ N(b.., (n.. R)^{-1})
  {
    Matrix sinv = invert(sdd);
    Matrix c_upper = cholesky(sinv).transpose();
    int dof = static_cast<int>(std::lround(post.dof));
    b.model.exact_sampler = [c_upper, dof, bdd, ndd](Lcprg& rng) {
      Matrix u = sample_wishart_cholesky(rng, dof, c_upper);
      Matrix r = u.transpose().mul(u);
      Matrix v = invert(r);
      Vec z = sample_normal_vec(rng, 4);
      Matrix lr = cholesky(r);
      Vec w = tri_solve_upper(lr.transpose(), z);
      Vec th(15, 0.0);
      for (int h = 0; h < 10; ++h) {
        auto [i, j] = dose_gamma_position(h);
        th[h] = v(i, j);
      }
      for (int i = 0; i < 4; ++i) th[10 + i] = bdd[i] + w[i] / std::sqrt(ndd);
      th[14] = 1.0;
      return th;
    };
  }

  // start: closed-form unconstrained optimum V = S.. / (a+n+1), beta = b..
  Vec star(15, 0.0);
  for (int h = 0; h < 10; ++h) {
    auto [i, j] = dose_gamma_position(h);
    star[h] = sdd(i, j) / (post.dof + 1.0);
  }
  for (int i = 0; i < 4; ++i) star[10 + i] = bdd[i];
  star[14] = 1.0;
  b.model.start = star;

  // 5-constraint system and its printed 5x15 Jacobian
  b.hyp.h_dim = 10;
  b.hyp.constraints.count = 5;
  b.hyp.constraints.h = [](const Vec& th) {
    const double d = th[14];
    return Vec{d * d * th[0] - th[2], d * d * th[1] - th[3], d * d * th[4] - th[5],
               d * th[10] - th[12], d * th[11] - th[13]};
  };
  b.hyp.constraints.jacobian = [](const Vec& th) {
    const double d = th[14];
    Matrix j(5, 15);
    j(0, 0) = d * d; j(0, 2) = -1.0; j(0, 14) = 2.0 * d * th[0];
    j(1, 1) = d * d; j(1, 3) = -1.0; j(1, 14) = 2.0 * d * th[1];
    j(2, 4) = d * d; j(2, 5) = -1.0; j(2, 14) = 2.0 * d * th[4];
    j(3, 10) = d;    j(3, 12) = -1.0; j(3, 14) = th[10];
    j(4, 11) = d;    j(4, 13) = -1.0; j(4, 14) = th[11];
    return j;
  };

  // feasible start on H derived from the unconstrained optimum
  {
    Vec hs = star;
    double delta0 = std::sqrt(std::max(hs[2] / hs[0], 1e-6));
    hs[14] = delta0;
    hs[2] = delta0 * delta0 * hs[0];
    hs[3] = delta0 * delta0 * hs[1];
    hs[5] = delta0 * delta0 * hs[4];
    hs[12] = delta0 * hs[10];
    hs[13] = delta0 * hs[11];
    b.hyp.start = hs;
  }

  // proximal-centralization maximizer: relax c from 1 to ~0, recentering the
  // Frobenius anchor at each outer step; an SPD failure raises c and restarts
  const long n_obs = stats.n;
  const BoxBounds box = b.model.box;
  auto logs_fn = log_surprise_parts;
  auto grad_fn = grad_log_surprise;
  b.model.custom_maximizer = [logs_fn, grad_fn, n_obs, box, star, grg](
                                 const ConstraintSet& extra, const Vec& start0) -> OptimResult {
    if (extra.count == 0) {
      // closed form: V* = S../(a+n+1), beta* = b..
      OptimResult res;
      res.x = star;
      res.f = logs_fn(star);
      res.status = OptimStatus::Converged;
      return res;
    }
    Vec x = start0;
    Matrix anchor = dose_v_of_gamma(x);
    double c = 1.0;
    OptimResult last;
    int restarts = 0;
    while (true) {
      ObjectiveFn obj = [&, c](const Vec& th) {
        double ls = logs_fn(th);
        if (ls == kNegInf) return kNegInf;
        Matrix v = dose_v_of_gamma(th);
        double fro2 = (v - anchor).frob_norm();
        return ls - c * n_obs * fro2 * fro2;
      };
      GradientFn gobj = [&, c](const Vec& th) {
        Vec g = grad_fn(th);
        Matrix v = dose_v_of_gamma(th);
        for (int h = 0; h < 10; ++h) {
          auto [i, j] = dose_gamma_position(h);
          double entry = v(i, j) - anchor(i, j);
          g[h] -= 2.0 * c * n_obs * ((i == j) ? entry : 2.0 * entry);
        }
        return g;
      };
      GrgOptions opts = grg;
      opts.audit_start_jacobian = false;
      last = grg_maximize(obj, gobj, extra, box, x, opts);
      if (!last.ok() && restarts < 4) {
        c *= 8.0;
        ++restarts;
        continue;
      }
      x = last.x;
      anchor = dose_v_of_gamma(x);
      if (c < 1e-8) break;
      c *= 0.5;
    }
    last.f = logs_fn(x);
    return last;
  };

  return b;
}

// ---- Normal-Wishart conjugate update -----------------------------------

// n.. = n' + n, beta.. = (n xbar + n' beta') / n.., e.. = e' + n,
// S.. = S + S' + (n n'/(n + n')) (beta' - xbar)(beta' - xbar)'.
inline NormalWishartParams normal_wishart_update(const NormalWishartParams& prior, const Vec& xbar,
                                                 const Matrix& s, long n) {
  if (n < 0) throw std::invalid_argument("normal_wishart_update: negative sample size");
  if (n == 0) return prior;
  const int d = static_cast<int>(xbar.size());
  NormalWishartParams post;
  post.n_pseudo = prior.n_pseudo + n;
  post.dof = prior.dof + n;
  post.mean.assign(d, 0.0);
  Vec pm = prior.mean.empty() ? Vec(d, 0.0) : prior.mean;
  for (int i = 0; i < d; ++i) post.mean[i] = (n * xbar[i] + prior.n_pseudo * pm[i]) / post.n_pseudo;
  Matrix ps = (prior.scatter.rows() == d) ? prior.scatter : Matrix(d, d);
  post.scatter = Matrix(d, d);
  const double shrink = (prior.n_pseudo > 0.0) ? n * prior.n_pseudo / (n + prior.n_pseudo) : 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      post.scatter(i, j) = s(i, j) + ps(i, j) + shrink * (pm[i] - xbar[i]) * (pm[j] - xbar[j]);
  return post;
}

}  // namespace evcore
