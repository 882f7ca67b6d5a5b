#pragma once

// Monte Carlo estimation of the e-value ratio, its precision control, the
// step-function truth function, and the adaptive random-walk Metropolis
// sampler for non-conjugate posteriors.
//
// Surprise values and importance weights are carried in log space so that
// unnormalized kernels never overflow; only ratios ever matter.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "evcore/linalg.hpp"
#include "evcore/rng.hpp"
#include "evcore/special.hpp"

namespace evcore {

// ---- generic integrators ----------------------------------------------

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  long m = 0;
};

// Mean of f over draws from `sampler`; unbiased with the usual CLT error.
template <class F, class Sampler>
McEstimate crude_mc(F&& f, Sampler&& sampler, long m, Lcprg& rng) {
  double sum = 0.0, sum2 = 0.0;
  for (long j = 0; j < m; ++j) {
    double v = f(sampler(rng));
    sum += v;
    sum2 += v * v;
  }
  double mean = sum / m;
  double var = std::max(0.0, sum2 / m - mean * mean);
  return {mean, std::sqrt(var / m), m};
}

// Bernoulli estimator for 0 <= f <= 1 on the unit interval.
template <class F>
McEstimate hit_or_miss_mc(F&& f, long m, Lcprg& rng) {
  long hits = 0;
  for (long j = 0; j < m; ++j) {
    double x = rng.next_uniform();
    double y = rng.next_uniform();
    double v = f(x);
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("hit_or_miss_mc: integrand outside [0,1]");
    if (y <= v) ++hits;
  }
  double p = static_cast<double>(hits) / m;
  return {p, std::sqrt(p * (1.0 - p) / m), m};
}

// ---- surprise samples --------------------------------------------------

// Weighted surprise draws; exact sampling means all weights are 1
// (log_w empty). log_s[j] = log s(theta^j).
struct SurpriseSample {
  std::vector<double> log_s;
  std::vector<double> log_w;          // empty for exact sampling
  std::vector<Vec> draws;             // kept only when requested
  long m = 0;
  bool exact = true;
  double ess = 0.0;                   // effective sample size (= m when iid)
  std::uint64_t seed = 0;

  double weight(long j) const { return exact ? 1.0 : std::exp(log_w[j] - log_w_max); }
  double log_w_max = 0.0;

  void finalize() {
    m = static_cast<long>(log_s.size());
    if (!exact) {
      log_w_max = kNegInf;
      for (double lw : log_w) log_w_max = std::max(log_w_max, lw);
      if (!(log_w_max > kNegInf)) throw std::runtime_error("SurpriseSample: all importance weights vanish");
    }
    if (ess == 0.0) ess = static_cast<double>(m);
  }
};

struct EvEstimate {
  double ev = 0.0;        // in [0,1]
  double delta = 0.0;     // half-width at the requested confidence
  double beta = 0.05;     // 1 - confidence level
  long m = 0;
  double m_effective = 0.0;
  double xi_star = 0.0;   // sd(Z 1(s<=s*)) / mean(Z)
  double xi_comp = 0.0;   // sd(Z 1(s> s*)) / mean(Z)
  bool degenerate = false;
};

// W(s*) on a sample: weighted fraction of draws with s(theta) <= s*.
inline double sample_ev_at(const SurpriseSample& s, double log_s_star) {
  double num = 0.0, den = 0.0;
  for (long j = 0; j < s.m; ++j) {
    double w = s.weight(j);
    den += w;
    if (s.log_s[j] <= log_s_star) num += w;
  }
  if (den == 0.0) throw std::runtime_error("sample_ev_at: zero total weight");
  return num / den;
}

// Delta^2 = (chi^2_{1-beta}(1)/m)(xi*^2 (1-ev)^2 + xi_c^2 ev^2 + 2 ev^2 (1-ev)^2)
inline double ev_delta_formula(double xi_star, double xi_comp, double ev, double m_eff, double beta) {
  const double q = chi2_quantile(1.0, 1.0 - beta);
  const double h = ev, hb = 1.0 - ev;
  return std::sqrt(q / m_eff *
                   (xi_star * xi_star * hb * hb + xi_comp * xi_comp * h * h + 2.0 * h * h * hb * hb));
}

// Plug-in precision from a surprise sample; for MCMC input m is replaced by
// the effective sample size.
inline EvEstimate ev_precision(const SurpriseSample& s, double log_s_star, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("ev_precision: beta outside (0,1)");
  double sum_w = 0.0, sum_star = 0.0, sum_star2 = 0.0, sum_comp = 0.0, sum_comp2 = 0.0;
  for (long j = 0; j < s.m; ++j) {
    double w = s.weight(j);
    sum_w += w;
    if (s.log_s[j] <= log_s_star) {
      sum_star += w;
      sum_star2 += w * w;
    } else {
      sum_comp += w;
      sum_comp2 += w * w;
    }
  }
  EvEstimate e;
  e.beta = beta;
  e.m = s.m;
  e.m_effective = s.ess;
  const double mu = sum_w / s.m;
  e.ev = sum_star / sum_w;
  const double mu_star = sum_star / s.m;
  const double mu_comp = sum_comp / s.m;
  const double var_star = std::max(0.0, sum_star2 / s.m - mu_star * mu_star);
  const double var_comp = std::max(0.0, sum_comp2 / s.m - mu_comp * mu_comp);
  e.xi_star = std::sqrt(var_star) / mu;
  e.xi_comp = std::sqrt(var_comp) / mu;
  if (e.ev == 0.0 || e.ev == 1.0) {
    e.degenerate = true;
    e.delta = 0.0;
    return e;
  }
  e.delta = ev_delta_formula(e.xi_star, e.xi_comp, e.ev, e.m_effective, beta);
  return e;
}

// Smallest m meeting a target half-width delta at the current plug-ins:
// m >= (chi^2_{1-beta}(1)/delta^2)(xi*^2 (1-ev)^2 + xi_c^2 ev^2 + 2 ev^2 (1-ev)^2).
inline long ev_required_m(const EvEstimate& e, double delta_target) {
  if (!(delta_target > 0.0)) throw std::invalid_argument("ev_required_m: target must be positive");
  const double q = chi2_quantile(1.0, 1.0 - e.beta);
  const double h = e.ev, hb = 1.0 - e.ev;
  double bracket = e.xi_star * e.xi_star * hb * hb + e.xi_comp * e.xi_comp * h * h + 2.0 * h * h * hb * hb;
  return static_cast<long>(std::ceil(q * bracket / (delta_target * delta_target)));
}

// ---- random walk Metropolis ---------------------------------------------

struct RwOptions {
  long m = 10000;                // post burn-in draws
  long burn_in = -1;             // default 20% of m
  double target_accept_lo = 0.2;
  double target_accept_hi = 0.5;
  int adapt_window = 200;
  double blend = 0.15;           // lambda in (1-lambda) S + lambda D
  bool keep_draws = true;
};

struct RwChain {
  std::vector<Vec> draws;
  double acceptance_rate = 0.0;
  double scale = 0.0;
  long proposals = 0;
};

// Adaptive random-walk Metropolis with acceptance alpha = min(1, g_j/g_i)
// computed from kernel ratios. Proposal covariance is a convex combination
// of the running sample covariance and a diagonal prior guess; adaptation
// runs during burn-in only.
template <class LogKernel, class Visitor>
RwChain rw_metropolis_visit(LogKernel&& log_kernel, const Vec& theta0, const RwOptions& opts,
                            Lcprg& rng, Visitor&& visit) {
  const int d = static_cast<int>(theta0.size());
  const long burn = (opts.burn_in >= 0) ? opts.burn_in : opts.m / 5;
  Vec x = theta0;
  double lx = log_kernel(x);
  if (!std::isfinite(lx)) throw std::invalid_argument("rw_metropolis: log kernel not finite at start");

  Vec diag_prior(d);
  for (int i = 0; i < d; ++i) diag_prior[i] = std::pow(0.1 * (1.0 + std::fabs(theta0[i])), 2);

  // running moments for the adapted covariance
  Vec mean(x);
  Matrix cov(d, d);
  long nseen = 1;

  double scale = 2.38 / std::sqrt(static_cast<double>(d));
  Matrix prop_chol(d, d);
  auto refresh_proposal = [&]() {
    Matrix sigma(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = (nseen > 2 * d) ? (1.0 - opts.blend) * cov(i, j) / std::max<long>(nseen - 1, 1) : 0.0;
        sigma(i, j) = s + ((i == j) ? opts.blend * diag_prior[i] : 0.0);
      }
    for (int i = 0; i < d; ++i) sigma(i, i) += 1e-12;
    prop_chol = cholesky(sigma);
  };
  refresh_proposal();

  RwChain chain;
  if (opts.keep_draws) chain.draws.reserve(opts.m);
  long accepted = 0, window_accepted = 0, window_count = 0;
  const long total = burn + opts.m;
  for (long t = 0; t < total; ++t) {
    Vec z = sample_normal_vec(rng, d);
    Vec y(x);
    for (int i = 0; i < d; ++i) {
      double step = 0.0;
      for (int j = 0; j <= i; ++j) step += prop_chol(i, j) * z[j];
      y[i] += scale * step;
    }
    double ly = log_kernel(y);
    bool accept = false;
    if (ly > kNegInf) {
      double ratio = ly - lx;
      accept = ratio >= 0.0 || rng.next_uniform() < std::exp(ratio);
    }
    if (accept) {
      x = y;
      lx = ly;
      ++accepted;
      ++window_accepted;
    }
    ++window_count;

    const bool adapting = t < burn;
    if (adapting) {
      // update running mean / covariance with the current state
      ++nseen;
      Vec delta(d);
      for (int i = 0; i < d; ++i) delta[i] = x[i] - mean[i];
      for (int i = 0; i < d; ++i) mean[i] += delta[i] / nseen;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) cov(i, j) += delta[i] * (x[j] - mean[j]);
      if (window_count >= opts.adapt_window) {
        double rate = static_cast<double>(window_accepted) / window_count;
        if (window_accepted == 0)
          throw std::runtime_error("rw_metropolis: zero acceptance over a full adaptation window");
        if (rate < opts.target_accept_lo) scale *= 0.7;
        else if (rate > opts.target_accept_hi) scale *= 1.3;
        refresh_proposal();
        window_accepted = 0;
        window_count = 0;
      }
    } else {
      visit(x);
      if (opts.keep_draws) chain.draws.push_back(x);
    }
  }
  chain.acceptance_rate = static_cast<double>(accepted) / total;
  chain.scale = scale;
  chain.proposals = total;
  return chain;
}

template <class LogKernel>
RwChain rw_metropolis(LogKernel&& log_kernel, const Vec& theta0, const RwOptions& opts, Lcprg& rng) {
  return rw_metropolis_visit(log_kernel, theta0, opts, rng, [](const Vec&) {});
}

// Effective sample size of a 0/1 (or real) series by Geyer's initial
// positive sequence on the autocovariances.
inline double effective_sample_size(const std::vector<double>& x) {
  const long n = static_cast<long>(x.size());
  if (n < 10) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double c0 = 0.0;
  for (double v : x) c0 += (v - mean) * (v - mean);
  c0 /= n;
  if (c0 <= 0.0) return static_cast<double>(n);
  auto gamma_at = [&](long lag) {
    double s = 0.0;
    for (long i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / n;
  };
  double tau = 1.0;
  for (long k = 1; k + 1 < n / 2; k += 2) {
    double pair = gamma_at(k) + gamma_at(k + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair / c0;
  }
  return std::max(1.0, static_cast<double>(n) / tau);
}

// ---- truth functions -----------------------------------------------------

// Monotone step approximation of the cumulative surprise distribution W(v).
// Thresholds are stored as log surprise values; the last one is log(s-hat)
// and carries mass 1.
struct TruthFunction {
  std::vector<double> log_thresholds;
  std::vector<double> mass;
  double log_s_star = 0.0;
  double log_s_hat = 0.0;
  long m = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (log_thresholds.size() != mass.size() || mass.empty())
      throw std::invalid_argument("TruthFunction: threshold/mass size mismatch");
    for (size_t i = 1; i < mass.size(); ++i) {
      if (log_thresholds[i] < log_thresholds[i - 1])
        throw std::invalid_argument("TruthFunction: thresholds not sorted");
      if (mass[i] + 1e-15 < mass[i - 1]) throw std::invalid_argument("TruthFunction: mass not monotone");
    }
    if (std::fabs(mass.back() - 1.0) > 1e-9)
      throw std::invalid_argument("TruthFunction: final mass must be 1");
    if (log_s_star > log_s_hat + 1e-12)
      throw std::invalid_argument("TruthFunction: s* must not exceed s-hat");
  }

  // W at log v: mass of the largest threshold <= log v.
  double eval_log(double log_v) const {
    auto it = std::upper_bound(log_thresholds.begin(), log_thresholds.end(), log_v);
    if (it == log_thresholds.begin()) return 0.0;
    return mass[static_cast<size_t>(it - log_thresholds.begin()) - 1];
  }

  double ev() const { return eval_log(log_s_star); }

  // Point masses between consecutive thresholds (atoms at the thresholds).
  std::vector<std::pair<double, double>> atoms() const {
    std::vector<std::pair<double, double>> a;
    double prev = 0.0;
    for (size_t i = 0; i < mass.size(); ++i) {
      double p = mass[i] - prev;
      if (p > 0.0) a.emplace_back(log_thresholds[i], p);
      prev = mass[i];
    }
    return a;
  }

  static TruthFunction from_atoms(std::vector<std::pair<double, double>> atoms, double log_s_star,
                                  double log_s_hat, long m = 0, std::uint64_t seed = 0) {
    std::sort(atoms.begin(), atoms.end());
    TruthFunction tf;
    double acc = 0.0;
    for (auto& [lv, p] : atoms) {
      acc += p;
      if (!tf.log_thresholds.empty() && lv == tf.log_thresholds.back())
        tf.mass.back() = acc;
      else {
        tf.log_thresholds.push_back(lv);
        tf.mass.push_back(acc);
      }
    }
    if (std::fabs(acc - 1.0) > 1e-9) throw std::invalid_argument("TruthFunction::from_atoms: masses must sum to 1");
    if (!tf.mass.empty()) tf.mass.back() = 1.0;
    tf.log_s_star = log_s_star;
    tf.log_s_hat = std::max(log_s_hat, tf.log_thresholds.back());
    tf.m = m;
    tf.seed = seed;
    tf.validate();
    return tf;
  }
};

// k-step truth function from a surprise sample. Thresholds are geometric in
// the surprise ratio (uniform in log surprise) over [min s, s-hat], with s*
// inserted exactly so W(s*) reproduces the estimator.
inline TruthFunction estimate_truth_function(const SurpriseSample& s, int k, double log_s_hat,
                                             double log_s_star) {
  if (k < 1) throw std::invalid_argument("estimate_truth_function: need k >= 1");
  double max_obs = kNegInf, min_obs = kPosInf;
  for (long j = 0; j < s.m; ++j) {
    if (s.weight(j) <= 0.0) continue;  // zero-weight markers carry no surprise information
    max_obs = std::max(max_obs, s.log_s[j]);
    min_obs = std::min(min_obs, s.log_s[j]);
  }
  if (max_obs > log_s_hat + 1e-9)
    throw std::runtime_error("estimate_truth_function: observed surprise exceeds s-hat; unconstrained optimum missed");

  std::vector<double> cuts;
  cuts.reserve(k + 2);
  double lo = std::min(min_obs, log_s_star);
  if (!(lo < log_s_hat) || !std::isfinite(lo)) lo = log_s_hat - 1.0;
  // keep the grid within the representable surprise-ratio range
  lo = std::max(lo, log_s_hat - 700.0);
  for (int i = 1; i < k; ++i) cuts.push_back(lo + (log_s_hat - lo) * static_cast<double>(i) / k);
  cuts.push_back(log_s_hat);
  if (log_s_star < log_s_hat) cuts.push_back(log_s_star);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<double> acc(cuts.size(), 0.0);
  double total = 0.0;
  for (long j = 0; j < s.m; ++j) {
    double w = s.weight(j);
    total += w;
    auto it = std::lower_bound(cuts.begin(), cuts.end(), s.log_s[j]);
    // s.log_s[j] <= cuts[idx]: accumulate into the first cut at or above it
    size_t idx = static_cast<size_t>(it - cuts.begin());
    if (idx >= cuts.size()) idx = cuts.size() - 1;
    acc[idx] += w;
  }
  TruthFunction tf;
  tf.log_thresholds = cuts;
  tf.mass.resize(cuts.size());
  double run = 0.0;
  for (size_t i = 0; i < cuts.size(); ++i) {
    run += acc[i];
    tf.mass[i] = run / total;
  }
  tf.mass.back() = 1.0;
  // pin W(s*) to the single-pass estimator so both agree exactly; binned
  // accumulation can differ by a few ulps under non-unit weights
  {
    double ev_exact = sample_ev_at(s, log_s_star);
    auto it = std::lower_bound(cuts.begin(), cuts.end(), log_s_star);
    if (it != cuts.end() && *it == log_s_star) {
      size_t idx = static_cast<size_t>(it - cuts.begin());
      tf.mass[idx] = ev_exact;
      for (size_t i = idx; i-- > 0;) tf.mass[i] = std::min(tf.mass[i], ev_exact);
      for (size_t i = idx + 1; i < tf.mass.size(); ++i) tf.mass[i] = std::max(tf.mass[i], ev_exact);
      tf.mass.back() = 1.0;
    }
  }
  tf.log_s_star = log_s_star;
  tf.log_s_hat = log_s_hat;
  tf.m = s.m;
  tf.seed = s.seed;
  tf.validate();
  return tf;
}

// ---- deterministic substream plan -----------------------------------------

// Work is always split over a fixed number of logical substreams, whatever
// the execution thread count, so merged results are reproducible.
inline constexpr int kLogicalSubstreams = 16;

struct SubstreamSlice {
  int stream_id;
  long begin;
  long count;
};

inline std::vector<SubstreamSlice> plan_substreams(long m, int n_logical = kLogicalSubstreams) {
  std::vector<SubstreamSlice> slices;
  long base = m / n_logical, extra = m % n_logical, offset = 0;
  for (int s = 0; s < n_logical; ++s) {
    long cnt = base + (s < extra ? 1 : 0);
    slices.push_back({s, offset, cnt});
    offset += cnt;
  }
  return slices;
}

// Runs fn(slice, rng) over every logical substream, optionally on several
// threads; each slice owns a disjoint output range so merge order is fixed.
template <class Fn>
void for_each_substream(std::uint64_t seed, long m, int threads, Fn&& fn) {
  auto slices = plan_substreams(m);
  if (threads <= 1) {
    for (const auto& sl : slices) {
      Lcprg rng = Lcprg::substream(seed, static_cast<std::uint64_t>(sl.stream_id));
      fn(sl, rng);
    }
    return;
  }
  // static partition of slices over threads keeps execution deterministic
  std::vector<std::thread> pool;
  int nt = std::min<int>(threads, static_cast<int>(slices.size()));
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t i = t; i < slices.size(); i += nt) {
        Lcprg rng = Lcprg::substream(seed, static_cast<std::uint64_t>(slices[i].stream_id));
        fn(slices[i], rng);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace evcore
