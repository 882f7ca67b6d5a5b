#pragma once

// The FBST engine: e-value computation (optimize + integrate), QQ
// standardization, the loss-function decision rule, sensitivity and
// inconsistency indices, and logical composition of truth functions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evcore/mc.hpp"
#include "evcore/optim.hpp"
#include "evcore/rng.hpp"
#include "evcore/special.hpp"

namespace evcore {

// ---- model and hypothesis -------------------------------------------------

// Maps a unit-box quasi-random point to a parameter value and the log
// importance weight log(p_n(theta)/g(theta)); -inf weight means "outside".
struct QuasiMap {
  int dim = 0;
  std::function<std::pair<Vec, double>(const Vec&)> map;
};

// A parametric Bayesian model as a callable log-posterior kernel plus log
// reference kernel on a common parameter box. Domain equalities (such as
// the simplex sum) are carried with the model; hypothesis constraints come
// separately.
struct ModelSpec {
  std::string name;
  int dim = 0;  // coordinates of the working parameterization
  int t = 0;    // intrinsic dimension entering the QQ standardization
  ObjectiveFn log_posterior;
  ObjectiveFn log_reference;
  BoxBounds box;
  ConstraintSet domain = ConstraintSet::none();
  std::function<Vec(Lcprg&)> exact_sampler;  // draws from the posterior, optional
  GradientFn grad_log_surprise;              // optional analytic gradient
  std::optional<QuasiMap> quasi;             // optional quasi-random importance map
  Vec start;                                 // feasible interior start
  bool multimodal = false;
  // Model-specific replacement for the standard GRG phases (proximal
  // centralization and the like); receives the extra hypothesis
  // constraints, or an empty set for the unconstrained phase.
  std::function<OptimResult(const ConstraintSet&, const Vec&)> custom_maximizer;

  double log_surprise(const Vec& th) const { return log_posterior(th) - log_reference(th); }
};

struct HypothesisSpec {
  ConstraintSet constraints;
  int h_dim = 0;  // dim(H) = t - number of independent equalities
  Vec start;      // start point on (or near) the null set; empty -> model start
};

enum class SamplerMode { Exact, Mcmc, Quasi };

struct EvalueConfig {
  long m = 100000;
  double beta = 0.05;
  std::uint64_t seed = 1;
  int threads = 1;
  int k_thresholds = 64;
  std::optional<SamplerMode> sampler;  // default: exact when available, else MCMC
  bool want_truth_function = false;
  GrgOptions grg;
  RwOptions mcmc;
  long sa_presearch_steps = 20000;
};

struct EvalueReport {
  double ev = 0.0;
  double ev_bar = 1.0;
  double sev = 0.0;
  double log_s_star = 0.0;
  Vec theta_star;
  double log_s_hat = 0.0;
  Vec theta_hat;
  double delta = 0.0;
  double beta = 0.05;
  long m = 0;
  double m_effective = 0.0;
  std::uint64_t seed = 0;
  SamplerMode sampler = SamplerMode::Exact;
  OptimStatus status_unconstrained = OptimStatus::Converged;
  OptimStatus status_constrained = OptimStatus::Converged;
  int t = 0;
  int h_dim = 0;
  std::string model;
  std::optional<TruthFunction> truth;
};

namespace detail {

inline GradientFn fd_gradient(const ObjectiveFn& f, const BoxBounds& box) {
  return [f, box](const Vec& x) {
    Vec g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
      double step = 1e-7 * (1.0 + std::fabs(x[i]));
      Vec xp = x, xm = x;
      xp[i] = std::min(x[i] + step, box.hi[i]);
      xm[i] = std::max(x[i] - step, box.lo[i]);
      double denom = xp[i] - xm[i];
      g[i] = denom > 0.0 ? (f(xp) - f(xm)) / denom : 0.0;
    }
    return g;
  };
}

inline std::uint64_t sa_seed(std::uint64_t seed) { return seed ^ 0xa5a5a5a5a5a5a5a5ULL; }

// Smooth per-coordinate bijection between a box interior and free space,
// used to run ParTan on box-only models: the supremum of the surprise is
// unchanged under the substitution.
struct BoxTransform {
  BoxBounds box;

  Vec to_x(const Vec& w) const {
    Vec x(w.size());
    for (size_t i = 0; i < w.size(); ++i) {
      const double lo = box.lo[i], hi = box.hi[i];
      if (std::isfinite(lo) && std::isfinite(hi)) {
        double s = 1.0 / (1.0 + std::exp(-w[i]));
        x[i] = lo + (hi - lo) * s;
      } else if (std::isfinite(lo)) {
        x[i] = lo + std::exp(w[i]);
      } else if (std::isfinite(hi)) {
        x[i] = hi - std::exp(w[i]);
      } else {
        x[i] = w[i];
      }
    }
    return x;
  }

  Vec to_w(const Vec& x0) const {
    Vec w(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) {
      const double lo = box.lo[i], hi = box.hi[i];
      if (std::isfinite(lo) && std::isfinite(hi)) {
        double width = hi - lo;
        double t = std::min(std::max((x0[i] - lo) / width, 1e-9), 1.0 - 1e-9);
        w[i] = std::log(t / (1.0 - t));
      } else if (std::isfinite(lo)) {
        w[i] = std::log(std::max(x0[i] - lo, 1e-12));
      } else if (std::isfinite(hi)) {
        w[i] = std::log(std::max(hi - x0[i], 1e-12));
      } else {
        w[i] = x0[i];
      }
    }
    return w;
  }

  // dx_i/dw_i at w
  Vec scale(const Vec& w) const {
    Vec d(w.size());
    for (size_t i = 0; i < w.size(); ++i) {
      const double lo = box.lo[i], hi = box.hi[i];
      if (std::isfinite(lo) && std::isfinite(hi)) {
        double s = 1.0 / (1.0 + std::exp(-w[i]));
        d[i] = (hi - lo) * s * (1.0 - s);
      } else if (std::isfinite(lo)) {
        d[i] = std::exp(w[i]);
      } else if (std::isfinite(hi)) {
        d[i] = -std::exp(w[i]);
      } else {
        d[i] = 1.0;
      }
    }
    return d;
  }
};

inline ConstraintSet stack_constraints(const ConstraintSet& a, const ConstraintSet& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  ConstraintSet s;
  s.count = a.count + b.count;
  s.h = [a, b](const Vec& x) {
    Vec ha = a.h(x), hb = b.h(x);
    ha.insert(ha.end(), hb.begin(), hb.end());
    return ha;
  };
  s.jacobian = [a, b](const Vec& x) {
    Matrix ja = a.jacobian(x), jb = b.jacobian(x);
    Matrix j(ja.rows() + jb.rows(), ja.cols());
    for (int r = 0; r < ja.rows(); ++r)
      for (int c = 0; c < ja.cols(); ++c) j(r, c) = ja(r, c);
    for (int r = 0; r < jb.rows(); ++r)
      for (int c = 0; c < jb.cols(); ++c) j(ja.rows() + r, c) = jb(r, c);
    return j;
  };
  return s;
}

}  // namespace detail

// sev = 1 - QQ(t, h, ev-bar)
inline double sev_standardize(double ev_bar, int t, int h_dim) {
  if (h_dim < 0 || h_dim >= t) throw std::invalid_argument("sev_standardize: need 0 <= h < t");
  if (ev_bar < 0.0 || ev_bar > 1.0) throw std::invalid_argument("sev_standardize: ev-bar outside [0,1]");
  return 1.0 - qq_map(static_cast<double>(t), static_cast<double>(h_dim), ev_bar);
}

// ---- pipeline ---------------------------------------------------------------

// Surprise sample generation for each integration mode. The sample holds
// log s(theta^j) and, in the quasi mode, log importance weights.
inline SurpriseSample draw_surprise_sample(const ModelSpec& model, const EvalueConfig& cfg,
                                           SamplerMode mode, const Vec& theta_hat) {
  SurpriseSample sample;
  sample.seed = cfg.seed;
  sample.log_s.assign(cfg.m, 0.0);

  if (mode == SamplerMode::Exact) {
    if (!model.exact_sampler) throw std::invalid_argument("model has no exact posterior sampler");
    for_each_substream(cfg.seed, cfg.m, cfg.threads, [&](const SubstreamSlice& sl, Lcprg& rng) {
      for (long j = 0; j < sl.count; ++j) {
        Vec th = model.exact_sampler(rng);
        sample.log_s[sl.begin + j] = model.log_surprise(th);
      }
    });
    sample.exact = true;
    sample.finalize();
    return sample;
  }

  if (mode == SamplerMode::Mcmc) {
    // one chain per logical substream, all started at the MAP
    std::vector<double> chain_ess(kLogicalSubstreams, 0.0);
    for_each_substream(cfg.seed, cfg.m, cfg.threads, [&](const SubstreamSlice& sl, Lcprg& rng) {
      RwOptions opts = cfg.mcmc;
      opts.m = sl.count;
      opts.burn_in = std::max<long>(sl.count / 5, 200);
      opts.keep_draws = false;
      long idx = sl.begin;
      rw_metropolis_visit(
          [&](const Vec& th) {
            for (size_t i = 0; i < th.size(); ++i)
              if (th[i] < model.box.lo[i] || th[i] > model.box.hi[i]) return kNegInf;
            return model.log_posterior(th);
          },
          theta_hat, opts, rng, [&](const Vec& th) { sample.log_s[idx++] = model.log_surprise(th); });
      std::vector<double> series(sample.log_s.begin() + sl.begin,
                                 sample.log_s.begin() + sl.begin + sl.count);
      chain_ess[sl.stream_id] = effective_sample_size(series);
    });
    sample.exact = true;  // draws follow the posterior itself; weights are 1
    double ess = 0.0;
    for (double e : chain_ess) ess += e;
    sample.ess = std::min(ess, static_cast<double>(cfg.m));
    sample.finalize();
    return sample;
  }

  // Quasi mode: deterministic low-discrepancy points with importance
  // weights; restricted to models exposing a bounded unit-box map.
  if (!model.quasi) throw std::invalid_argument("model does not support the quasi sampler");
  sample.log_w.assign(cfg.m, 0.0);
  HaltonSeq seq(model.quasi->dim, static_cast<std::uint64_t>(cfg.m) + 1);
  if (cfg.seed != 0) {
    Lcprg shift_rng(cfg.seed);
    Vec shift(model.quasi->dim);
    for (double& v : shift) v = shift_rng.next_uniform();
    seq.set_shift(shift);
  }
  for (long j = 0; j < cfg.m; ++j) {
    auto [th, lw] = model.quasi->map(seq.next_point());
    if (lw == kNegInf) {
      sample.log_s[j] = kNegInf;
      sample.log_w[j] = kNegInf;
    } else {
      sample.log_s[j] = model.log_surprise(th);
      sample.log_w[j] = lw;
    }
  }
  sample.exact = false;
  sample.finalize();
  // weight degeneracy diagnostics: flag an unbounded weight ratio
  double sum = 0.0;
  for (double lw : sample.log_w)
    if (lw > kNegInf) sum += std::exp(lw - sample.log_w_max);
  if (sum < 8.0)  // max weight dominates the whole sum
    throw std::runtime_error("draw_surprise_sample: importance weights are degenerate");
  return sample;
}

// One-call sampling plus estimation: draws a surprise sample in the given
// mode and evaluates ev-hat = sum Z 1(s <= s*) / sum Z with its precision.
inline std::pair<SurpriseSample, EvEstimate> importance_sample_ev(const ModelSpec& model,
                                                                  double log_s_star,
                                                                  const EvalueConfig& cfg,
                                                                  SamplerMode mode,
                                                                  const Vec& theta_hat) {
  SurpriseSample sample = draw_surprise_sample(model, cfg, mode, theta_hat);
  EvEstimate est = ev_precision(sample, log_s_star, cfg.beta);
  return {std::move(sample), est};
}

// ev(H) = W(s*): constrained and unconstrained maximization of the log
// surprise followed by Monte Carlo estimation of the cumulative surprise
// mass at s*.
inline EvalueReport compute_evalue(const ModelSpec& model, const HypothesisSpec& hyp,
                                   const EvalueConfig& cfg) {
  if (cfg.m < 1) throw std::invalid_argument("compute_evalue: m must be positive");
  EvalueReport rep;
  rep.model = model.name;
  rep.seed = cfg.seed;
  rep.beta = cfg.beta;
  rep.t = model.t;
  rep.h_dim = hyp.h_dim;

  ObjectiveFn log_s = [&model](const Vec& th) { return model.log_surprise(th); };
  GradientFn grad =
      model.grad_log_surprise ? model.grad_log_surprise : detail::fd_gradient(log_s, model.box);

  // (a) unconstrained phase over the whole domain
  Vec start = model.start;
  if (model.multimodal) {
    Lcprg sa_rng(detail::sa_seed(cfg.seed));
    AnnealSchedule sched;
    sched.mode = AnnealSchedule::Mode::Geometric;
    sched.max_steps = cfg.sa_presearch_steps;
    auto res = metropolis_anneal(
        [&](const Vec& x) {
          double v = log_s(x);
          return std::isfinite(v) ? -v : 1e100;
        },
        [&](const Vec& x, Lcprg& rng) {
          Vec y = x;
          for (size_t i = 0; i < y.size(); ++i) {
            double width = model.box.hi[i] - model.box.lo[i];
            double step = std::isfinite(width) ? 0.05 * width : 0.5 * (1.0 + std::fabs(x[i]));
            y[i] += step * (rng.next_uniform() - 0.5);
          }
          return model.box.clip(y);
        },
        sched, start, sa_rng);
    start = res.best;
  }

  OptimResult unc;
  if (model.custom_maximizer) {
    unc = model.custom_maximizer(ConstraintSet::none(), start);
  } else if (model.domain.count == 0) {
    // box-only models: ParTan on -log s through the smooth box transform,
    // then a short GRG polish in the native coordinates
    detail::BoxTransform tr{model.box};
    ObjectiveFn neg = [&](const Vec& w) {
      double v = log_s(tr.to_x(w));
      return std::isfinite(v) ? -v : 1e100;
    };
    GradientFn ngrad = [&](const Vec& w) {
      Vec g = grad(tr.to_x(w));
      Vec d = tr.scale(w);
      for (size_t i = 0; i < g.size(); ++i) g[i] = -g[i] * d[i];
      return g;
    };
    OptimResult inner = partan_minimize(neg, ngrad, tr.to_w(start), cfg.grg.tol_reduced_gradient);
    GrgOptions polish = cfg.grg;
    polish.max_iterations = 100;
    unc = grg_maximize(log_s, grad, model.domain, model.box, tr.to_x(inner.x), polish);
    if (inner.status == OptimStatus::Converged && unc.status == OptimStatus::MaxIterations)
      unc.status = OptimStatus::Converged;
  } else {
    // GRG handles the domain equalities together with the box
    unc = grg_maximize(log_s, grad, model.domain, model.box, start, cfg.grg);
  }
  rep.status_unconstrained = unc.status;
  rep.theta_hat = unc.x;
  rep.log_s_hat = log_s(unc.x);

  // (b) constrained phase on the null set
  ConstraintSet all = detail::stack_constraints(model.domain, hyp.constraints);
  OptimResult con;
  if (hyp.constraints.count == 0) {
    con = unc;  // H = Theta
  } else if (model.custom_maximizer) {
    Vec hstart = hyp.start.empty() ? model.start : hyp.start;
    con = model.custom_maximizer(hyp.constraints, hstart);
  } else {
    Vec hstart = hyp.start.empty() ? model.start : hyp.start;
    con = grg_maximize(log_s, grad, all, model.box, hstart, cfg.grg);
  }
  rep.status_constrained = con.status;
  rep.theta_star = con.x;
  rep.log_s_star = log_s(con.x);

  if (rep.log_s_star > rep.log_s_hat + 10.0 * cfg.grg.tol_reduced_gradient) {
    throw std::runtime_error(
        "compute_evalue: s* exceeds s-hat; the unconstrained phase missed the global mode");
  }
  rep.log_s_hat = std::max(rep.log_s_hat, rep.log_s_star);

  // (c) integration phase
  SamplerMode mode = cfg.sampler.value_or(model.exact_sampler ? SamplerMode::Exact : SamplerMode::Mcmc);
  rep.sampler = mode;
  auto [sample, est] = importance_sample_ev(model, rep.log_s_star, cfg, mode, rep.theta_hat);

  if (hyp.constraints.count == 0) {
    rep.ev = 1.0;  // T(s-hat) is the whole space
    rep.delta = 0.0;
    rep.m = sample.m;
    rep.m_effective = sample.ess;
  } else {
    rep.ev = est.ev;
    rep.delta = est.delta;
    rep.m = est.m;
    rep.m_effective = est.m_effective;
  }
  rep.ev_bar = 1.0 - rep.ev;
  rep.sev = sev_standardize(rep.ev_bar, model.t, hyp.h_dim);

  if (cfg.want_truth_function) {
    double hat = std::max(rep.log_s_hat, *std::max_element(sample.log_s.begin(), sample.log_s.end()));
    rep.truth = estimate_truth_function(sample, cfg.k_thresholds, hat, rep.log_s_star);
  }
  return rep;
}

// ---- standardization, decision, support calculus ---------------------------

// Loss parameters of the accept/reject rule; accept H iff ev >= (b+d)/(a+d).
struct LossParams {
  double a = 1.0;
  double b = 0.0;
  double d = 1.0;

  double threshold() const {
    if (!(a > 0.0) || b < 0.0 || !(d > 0.0)) throw std::invalid_argument("LossParams: need a>0, b>=0, d>0");
    double phi = (b + d) / (a + d);
    if (phi < 0.0 || phi > 1.0) throw std::invalid_argument("LossParams: threshold outside [0,1]");
    return phi;
  }
};

inline bool decision_accept(double ev, const LossParams& loss) { return ev >= loss.threshold(); }

// Optional asymptotic threshold policy phi = b m-bar or b m-bar / (a + m-bar),
// with m-bar the (caller-supplied) tangential reference mass to the power gamma.
inline double threshold_from_reference_mass(double m_bar, double a, double b, bool rational_form) {
  if (m_bar < 0.0) throw std::invalid_argument("threshold_from_reference_mass: mass must be >= 0");
  return rational_form ? b * m_bar / (a + m_bar) : b * m_bar;
}

inline double possibilistic_disjunction(const std::vector<double>& evs) {
  if (evs.empty()) throw std::invalid_argument("possibilistic_disjunction: empty list");
  double m = 0.0;
  for (double e : evs) {
    if (e < 0.0 || e > 1.0) throw std::invalid_argument("possibilistic_disjunction: ev outside [0,1]");
    m = std::max(m, e);
  }
  return m;
}

// I = max - min; equals BI of the knowledge join of the points <ev, 1-ev>.
inline double inconsistency_index(const std::vector<double>& evs) {
  if (evs.empty()) throw std::invalid_argument("inconsistency_index: empty list");
  double lo = 1.0, hi = 0.0;
  for (double e : evs) {
    if (e < 0.0 || e > 1.0) throw std::invalid_argument("inconsistency_index: ev outside [0,1]");
    lo = std::min(lo, e);
    hi = std::max(hi, e);
  }
  return hi - lo;
}

// Credibility-doubt pair in the unit square bilattice.
struct BilatticePoint {
  double c = 0.0;
  double d = 0.0;
};

inline double bilattice_trust(const BilatticePoint& x) { return x.c - x.d; }
inline double bilattice_inconsistency(const BilatticePoint& x) { return x.c + x.d - 1.0; }
inline BilatticePoint knowledge_join(const BilatticePoint& a, const BilatticePoint& b) {
  return {std::max(a.c, b.c), std::max(a.d, b.d)};
}
inline BilatticePoint knowledge_meet(const BilatticePoint& a, const BilatticePoint& b) {
  return {std::min(a.c, b.c), std::min(a.d, b.d)};
}
inline BilatticePoint truth_join(const BilatticePoint& a, const BilatticePoint& b) {
  return {std::max(a.c, b.c), std::min(a.d, b.d)};
}
inline BilatticePoint truth_meet(const BilatticePoint& a, const BilatticePoint& b) {
  return {std::min(a.c, b.c), std::max(a.d, b.d)};
}
inline BilatticePoint bilattice_negation(const BilatticePoint& x) { return {x.d, x.c}; }
inline BilatticePoint bilattice_conflation(const BilatticePoint& x) { return {1.0 - x.c, 1.0 - x.d}; }

// ---- truth-function composition ---------------------------------------------

namespace detail {

// Mass-conserving condensation to at most k atoms; each bin keeps its total
// mass at its (linear-space) first moment.
inline std::vector<std::pair<double, double>> condense_atoms(
    std::vector<std::pair<double, double>> atoms, int k) {
  if (static_cast<int>(atoms.size()) <= k) return atoms;
  std::sort(atoms.begin(), atoms.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(k);
  const double per_bin = 1.0 / k;
  size_t i = 0;
  for (int bin = 0; bin < k && i < atoms.size(); ++bin) {
    double target = (bin == k - 1) ? 2.0 : per_bin;  // last bin takes the rest
    double mass = 0.0;
    double shift = atoms[i].first;
    double accum = 0.0;
    size_t start = i;
    while (i < atoms.size() && (mass < target || i == start)) {
      mass += atoms[i].second;
      accum += atoms[i].second * std::exp(atoms[i].first - shift);
      ++i;
      if (mass >= target && bin < k - 1) break;
    }
    if (mass > 0.0) out.emplace_back(shift + std::log(accum / mass), mass);
  }
  return out;
}

}  // namespace detail

// Step-function Mellin convolution: the law of the product of independent
// surprise variates, condensed back to at most k_max atoms.
inline TruthFunction mellin_convolve(const TruthFunction& w1, const TruthFunction& w2, int k_max = 64) {
  w1.validate();
  w2.validate();
  auto a1 = w1.atoms();
  auto a2 = w2.atoms();
  std::vector<std::pair<double, double>> prod;
  prod.reserve(a1.size() * a2.size());
  for (const auto& [lv1, p1] : a1)
    for (const auto& [lv2, p2] : a2) prod.emplace_back(lv1 + lv2, p1 * p2);
  prod = detail::condense_atoms(std::move(prod), k_max);
  return TruthFunction::from_atoms(std::move(prod), w1.log_s_star + w2.log_s_star,
                                   w1.log_s_hat + w2.log_s_hat,
                                   std::min(w1.m, w2.m), w1.seed);
}

struct ConjunctionResult {
  double ev = 0.0;
  double lower_bound = 0.0;  // product of the elementary e-values
  double upper_bound = 1.0;  // 1 - product of the complements
  TruthFunction composite;
};

// ev(AND_j H_j) = (convolution of the W_j) evaluated at the product of the
// component suprema; elementary e-values bound the composite from both sides.
inline ConjunctionResult conjunction_evalue(const std::vector<TruthFunction>& components,
                                            int k_max = 64) {
  if (components.empty()) throw std::invalid_argument("conjunction_evalue: empty list");
  ConjunctionResult out;
  out.composite = components[0];
  double lower = components[0].ev();
  double upper = 1.0 - components[0].ev();
  for (size_t j = 1; j < components.size(); ++j) {
    out.composite = mellin_convolve(out.composite, components[j], k_max);
    lower *= components[j].ev();
    upper *= 1.0 - components[j].ev();
  }
  out.ev = out.composite.ev();
  out.lower_bound = lower;
  out.upper_bound = 1.0 - upper;
  return out;
}

}  // namespace evcore
