#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "evcore/optim.hpp"
#include "evcore/special.hpp"

using namespace evcore;

TEST_CASE("golden section finds simple minima") {
  auto r1 = golden_section([](double x) { return (x - 1.0) * (x - 1.0); }, 0.0, 3.0, 1e-8);
  CHECK(r1.x == Catch::Approx(1.0).margin(1e-7));
  auto r2 = golden_section([](double x) { return std::fabs(x - 0.3); }, 0.0, 1.0, 1e-8);
  CHECK(r2.x == Catch::Approx(0.3).margin(1e-7));
  CHECK_THROWS(golden_section([](double x) { return std::log(x - 2.0); }, 0.0, 1.0, 1e-8));
}

TEST_CASE("golden section shrinks the bracket by the golden ratio") {
  std::vector<double> lengths;
  golden_section([](double x) { return x * x; }, -1.0, 2.0, 1e-10, 60,
                 [&](double a, double b) { lengths.push_back(b - a); });
  REQUIRE(lengths.size() > 10);
  for (size_t k = 1; k < lengths.size(); ++k)
    CHECK(lengths[k] == Catch::Approx(lengths[k - 1] * kGoldenRatio).margin(1e-12));
  // after k iterations the interval is (b - a) r^k
  double expect = 3.0 * std::pow(kGoldenRatio, double(lengths.size() - 1));
  CHECK(lengths.back() == Catch::Approx(expect).margin(1e-12));
}

TEST_CASE("quadratic fit line search") {
  // exact on a quadratic in one step
  auto q = [](double x) { return (x - 1.3) * (x - 1.3) + 2.0; };
  auto r = quadratic_fit_line_search(q, 0.0, 1.0, 3.0, 1e-9);
  CHECK(r.x == Catch::Approx(1.3).margin(1e-8));
  CHECK(r.iterations <= 3);

  // the eta_4 closed form on f = eta^2 - 2 eta through (0, 1, 3) lands on 1
  auto f = [](double e) { return e * e - 2.0 * e; };
  auto r2 = quadratic_fit_line_search(f, 0.0, 1.0, 3.0, 1e-10);
  CHECK(r2.x == Catch::Approx(1.0).margin(1e-9));

  // quartic with a linear term: stationary point of 4(x-1)^3 + 1
  auto g = [](double x) { return std::pow(x - 1.0, 4) + x; };
  double analytic = 1.0 - std::pow(0.25, 1.0 / 3.0);
  auto r3 = quadratic_fit_line_search(g, 0.0, 0.5, 2.0, 1e-10);
  CHECK(r3.x == Catch::Approx(analytic).margin(1e-6));

  // re-bracketing from a non-interpolating start still converges
  auto r4 = quadratic_fit_line_search(q, 2.0, 3.0, 4.0, 1e-9);
  CHECK(r4.x == Catch::Approx(1.3).margin(1e-6));
}

namespace {

ObjectiveFn quad_f(const Matrix& a, const Vec& b) {
  return [a, b](const Vec& x) {
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
      for (int j = 0; j < a.cols(); ++j) s += 0.5 * x[i] * a(i, j) * x[j];
      s -= b[i] * x[i];
    }
    return s;
  };
}

GradientFn quad_g(const Matrix& a, const Vec& b) {
  return [a, b](const Vec& x) {
    Vec g = a.mul(x);
    for (size_t i = 0; i < g.size(); ++i) g[i] -= b[i];
    return g;
  };
}

}  // namespace

TEST_CASE("partan terminates on a diagonal quadratic in two cycles") {
  Matrix a(2, 2);
  a(0, 0) = 2.0;  // f = x'Ax with A = diag(1, 10), scaled by the 1/2 in quad_f
  a(1, 1) = 20.0;
  Vec b{0.0, 0.0};
  OptimResult res = partan_minimize(quad_f(a, b), quad_g(a, b), {1.0, 1.0}, 1e-9);
  CHECK(res.ok());
  CHECK(res.iterations <= 2);
  CHECK(std::fabs(res.x[0]) < 1e-8);
  CHECK(std::fabs(res.x[1]) < 1e-8);
}

TEST_CASE("partan directions are A-conjugate") {
  const int n = 4;
  Lcprg g(23);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = 2.0 * g.next_uniform() - 1.0;
  Matrix a = m.transpose().mul(m);
  for (int i = 0; i < n; ++i) a(i, i) += n;
  Vec b(n, 0.0);
  std::vector<Vec> iterates;
  Vec x0(n);
  for (double& v : x0) v = g.next_uniform() + 0.5;
  iterates.push_back(x0);
  partan_minimize(quad_f(a, b), quad_g(a, b), x0, 1e-12, 400, 1e-14,
                  [&](const Vec& x) { iterates.push_back(x); });
  REQUIRE(iterates.size() >= 3);
  std::vector<Vec> w;
  for (size_t k = 1; k + 1 < iterates.size(); ++k) {
    Vec d(n);
    for (int i = 0; i < n; ++i) d[i] = iterates[k + 1][i] - iterates[k][i];
    double norm = 0.0;
    for (double v : d) norm += v * v;
    if (norm > 1e-20) w.push_back(d);
  }
  for (size_t p = 0; p < w.size(); ++p)
    for (size_t q = p + 1; q < w.size(); ++q) {
      Vec aw = a.mul(w[q]);
      double dot = 0.0, np = 0.0, nq = 0.0;
      for (int i = 0; i < n; ++i) {
        dot += w[p][i] * aw[i];
        np += w[p][i] * w[p][i];
        nq += w[q][i] * w[q][i];
      }
      CHECK(std::fabs(dot) < 1e-8 * std::sqrt(np * nq) * a.frob_norm());
    }
}

TEST_CASE("partan quadratic termination up to dimension 10") {
  Lcprg g(29);
  for (int n : {3, 6, 10}) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = 2.0 * g.next_uniform() - 1.0;
    Matrix a = m.transpose().mul(m);
    for (int i = 0; i < n; ++i) a(i, i) += 1.0;
    Vec b(n);
    for (double& v : b) v = g.next_uniform();
    OptimResult res = partan_minimize(quad_f(a, b), quad_g(a, b), Vec(n, 2.0), 1e-8, 400, 1e-14);
    CHECK(res.ok());
    CHECK(res.iterations <= n);
    Vec sol = solve(a, b);
    for (int i = 0; i < n; ++i) CHECK(res.x[i] == Catch::Approx(sol[i]).margin(1e-6));
  }
}

TEST_CASE("partan solves rosenbrock") {
  ObjectiveFn f = [](const Vec& x) {
    double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    return a * a + 100.0 * b * b;
  };
  GradientFn grad = [](const Vec& x) {
    double b = x[1] - x[0] * x[0];
    return Vec{-2.0 * (1.0 - x[0]) - 400.0 * x[0] * b, 200.0 * b};
  };
  OptimResult res = partan_minimize(f, grad, {-1.2, 1.0}, 1e-6, 2000);
  CHECK(res.ok());
  CHECK(res.x[0] == Catch::Approx(1.0).margin(1e-4));
  CHECK(res.x[1] == Catch::Approx(1.0).margin(1e-4));
}

TEST_CASE("grg solves the symmetric projection problem") {
  // maximize -|x|^2 subject to x1 + x2 = 1
  ObjectiveFn f = [](const Vec& x) { return -(x[0] * x[0] + x[1] * x[1]); };
  GradientFn g = [](const Vec& x) { return Vec{-2.0 * x[0], -2.0 * x[1]}; };
  ConstraintSet cs;
  cs.count = 1;
  cs.h = [](const Vec& x) { return Vec{x[0] + x[1] - 1.0}; };
  cs.jacobian = [](const Vec&) {
    Matrix j(1, 2);
    j(0, 0) = j(0, 1) = 1.0;
    return j;
  };
  OptimResult res = grg_maximize(f, g, cs, BoxBounds::unbounded(2), {0.9, 0.1});
  CHECK(res.ok());
  CHECK(res.x[0] == Catch::Approx(0.5).margin(1e-6));
  CHECK(res.x[1] == Catch::Approx(0.5).margin(1e-6));
  CHECK(res.feasibility < 1e-8);
}

TEST_CASE("grg respects the box and keeps iterates feasible") {
  // maximize x1 + x2 on the unit box with x1 - x2 = 0.2
  ObjectiveFn f = [](const Vec& x) { return x[0] + x[1]; };
  GradientFn g = [](const Vec&) { return Vec{1.0, 1.0}; };
  ConstraintSet cs;
  cs.count = 1;
  cs.h = [](const Vec& x) { return Vec{x[0] - x[1] - 0.2}; };
  cs.jacobian = [](const Vec&) {
    Matrix j(1, 2);
    j(0, 0) = 1.0;
    j(0, 1) = -1.0;
    return j;
  };
  BoxBounds box;
  box.lo = {0.0, 0.0};
  box.hi = {1.0, 1.0};
  bool inside = true;
  ObjectiveFn watched = [&](const Vec& x) {
    for (double v : x) inside = inside && v >= -1e-12 && v <= 1.0 + 1e-12;
    return f(x);
  };
  OptimResult res = grg_maximize(watched, g, cs, box, {0.5, 0.3});
  CHECK(inside);
  CHECK(res.feasibility < 1e-8);
  CHECK(res.x[0] == Catch::Approx(1.0).margin(1e-6));
  CHECK(res.x[1] == Catch::Approx(0.8).margin(1e-6));
}

TEST_CASE("grg audits a wrong analytic jacobian") {
  ObjectiveFn f = [](const Vec& x) { return -x[0] * x[0] - x[1] * x[1]; };
  GradientFn g = [](const Vec& x) { return Vec{-2.0 * x[0], -2.0 * x[1]}; };
  ConstraintSet cs;
  cs.count = 1;
  cs.h = [](const Vec& x) { return Vec{x[0] + x[1] - 1.0}; };
  cs.jacobian = [](const Vec&) {
    Matrix j(1, 2);
    j(0, 0) = 1.0;
    j(0, 1) = 3.0;  // wrong on purpose
    return j;
  };
  CHECK_THROWS(grg_maximize(f, g, cs, BoxBounds::unbounded(2), {0.5, 0.5}));
}

TEST_CASE("metropolis annealing at the zero-temperature limit is greedy") {
  // every neighbor of the start is uphill: with a huge fixed theta nothing moves
  auto energy = [](int s) { return s == 0 ? 0.0 : 1.0; };
  auto neighbor = [](int, Lcprg& g) { return 1 + static_cast<int>(g.next_uniform() * 3); };
  AnnealSchedule sched;
  sched.mode = AnnealSchedule::Mode::Geometric;
  sched.theta0 = 1e9;
  sched.factor = 1.0;
  sched.freeze_acceptance = -1.0;
  sched.max_steps = 2000;
  Lcprg rng(31);
  auto res = metropolis_anneal(energy, neighbor, sched, 0, rng);
  CHECK(res.best_energy == 0.0);
  CHECK(res.accepted == 0);
}

TEST_CASE("metropolis sampling preserves the gibbs distribution") {
  // 8-state ring at fixed theta; visit frequencies against exact Gibbs masses
  const int d = 8;
  const double theta = 0.7;
  std::vector<double> h{0.0, 1.3, 0.4, 2.0, 0.9, 0.2, 1.7, 0.6};
  auto energy = [&](int s) { return h[s]; };
  auto neighbor = [&](int s, Lcprg& g) {
    return (g.next_uniform() < 0.5) ? (s + 1) % d : (s + d - 1) % d;
  };
  AnnealSchedule sched;
  sched.mode = AnnealSchedule::Mode::Geometric;
  sched.theta0 = theta;
  sched.factor = 1.0;  // fixed temperature
  sched.freeze_acceptance = -1.0;
  sched.max_steps = 1000000;
  std::vector<long> visits(d, 0);
  Lcprg rng(37);
  metropolis_anneal(energy, neighbor, sched, 0, rng, [&](const int& s) { ++visits[s]; });
  double z = 0.0;
  std::vector<double> gibbs(d);
  for (int s = 0; s < d; ++s) {
    gibbs[s] = std::exp(-theta * h[s]);
    z += gibbs[s];
  }
  double chi2 = 0.0;
  for (int s = 0; s < d; ++s) {
    double expect = sched.max_steps * gibbs[s] / z;
    chi2 += (visits[s] - expect) * (visits[s] - expect) / expect;
  }
  CHECK(chi2 < chi2_quantile(d - 1, 0.99));
}

TEST_CASE("logarithmic cooling solves the 64-point double well") {
  // global minimum at 16, local trap at 48
  auto energy = [](int s) {
    double a = (s - 16) * (s - 16) / 64.0;
    double t = (s - 48) * (s - 48) / 64.0 + 0.6;
    return std::min(a, t);
  };
  auto neighbor = [](int s, Lcprg& g) {
    int step = (g.next_uniform() < 0.5) ? -1 : 1;
    int next = s + step;
    if (next < 0) next = 0;
    if (next > 63) next = 63;
    return next;
  };
  AnnealSchedule sched;
  sched.mode = AnnealSchedule::Mode::Logarithmic;
  // cooling constant n Delta: diameter 63 times the largest one-step differential
  double delta = 0.0;
  for (int s = 0; s < 63; ++s) delta = std::max(delta, std::fabs(energy(s + 1) - energy(s)));
  sched.cooling_constant = 63.0 * delta;
  sched.max_steps = 30000;
  int successes = 0;
  for (int run = 0; run < 100; ++run) {
    Lcprg rng(1000 + run);
    auto res = metropolis_anneal(energy, neighbor, sched, 48, rng);
    if (res.best == 16) ++successes;
  }
  CHECK(successes >= 95);
}

TEST_CASE("dobroushin coefficient") {
  CHECK(dobroushin_coefficient(Matrix::identity(3)) == 1.0);
  Matrix flat(3, 3, 1.0 / 3.0);
  CHECK(dobroushin_coefficient(flat) == 0.0);
  Matrix bad(2, 2, 0.3);
  CHECK_THROWS(dobroushin_coefficient(bad));
}

TEST_CASE("dobroushin submultiplicativity over random pairs") {
  Lcprg g(41);
  for (int trial = 0; trial < 1000; ++trial) {
    int d = 2 + static_cast<int>(g.next_uniform() * 5);
    auto random_kernel = [&](int dim) {
      Matrix p(dim, dim);
      for (int i = 0; i < dim; ++i) {
        double row = 0.0;
        for (int j = 0; j < dim; ++j) {
          p(i, j) = g.next_uniform() + 1e-3;
          row += p(i, j);
        }
        for (int j = 0; j < dim; ++j) p(i, j) /= row;
      }
      return p;
    };
    Matrix p = random_kernel(d), q = random_kernel(d);
    CHECK(dobroushin_coefficient(p.mul(q)) <=
          dobroushin_coefficient(p) * dobroushin_coefficient(q) + 1e-12);
  }
}

TEST_CASE("bregman with only the normalization constraint keeps a uniform prior") {
  const int n = 6;
  Matrix a(1, n, 1.0);
  Vec b{1.0};
  auto res = bregman_minimize_divergence(Vec(n, 1.0 / n), a, b, 1e-12);
  REQUIRE(res.converged);
  for (int i = 0; i < n; ++i) CHECK(res.p[i] == Catch::Approx(1.0 / n).margin(1e-10));
}

namespace {

// independent 1-D oracle: exponential tilt p_i = exp(nu i) / Z matching a
// mean constraint, solved by bisection on nu
std::vector<double> dice_tilt_oracle(const std::vector<double>& prior, double target) {
  auto mean_at = [&](double nu) {
    double z = 0.0, m = 0.0;
    for (int i = 0; i < 6; ++i) {
      double w = prior[i] * std::exp(nu * (i + 1));
      z += w;
      m += w * (i + 1);
    }
    return m / z;
  };
  double lo = -5.0, hi = 5.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mean_at(mid) < target) lo = mid; else hi = mid;
  }
  double nu = 0.5 * (lo + hi), z = 0.0;
  std::vector<double> p(6);
  for (int i = 0; i < 6; ++i) {
    p[i] = prior[i] * std::exp(nu * (i + 1));
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

}  // namespace

TEST_CASE("bregman reproduces the exponential tilt for the dice mean constraint") {
  Matrix a(2, 6);
  for (int i = 0; i < 6; ++i) {
    a(0, i) = 1.0;       // normalization row
    a(1, i) = i + 1.0;   // face value
  }
  Vec b{1.0, 4.0};
  Vec uniform(6, 1.0 / 6.0);
  auto res = bregman_minimize_divergence(uniform, a, b, 1e-12);
  REQUIRE(res.converged);
  auto oracle = dice_tilt_oracle(std::vector<double>(uniform.begin(), uniform.end()), 4.0);
  for (int i = 0; i < 6; ++i) CHECK(res.p[i] == Catch::Approx(oracle[i]).margin(1e-9));
  // exponential-family form p = q exp((w'A)' - 1)
  for (int i = 0; i < 6; ++i) {
    double expform = uniform[i] * std::exp(res.multipliers[0] * a(0, i) + res.multipliers[1] * a(1, i) - 1.0);
    CHECK(res.p[i] == Catch::Approx(expform).margin(1e-10));
  }
}

TEST_CASE("bregman posterior-prior divergence beats random feasible points") {
  // prior: a Bayesian posterior proportional to counts + 1
  std::vector<long> counts{7, 3, 5, 9, 2, 4};
  Vec q(6);
  double tot = 0.0;
  for (int i = 0; i < 6; ++i) {
    q[i] = counts[i] + 1.0;
    tot += q[i];
  }
  for (double& v : q) v /= tot;
  Matrix a(2, 6);
  for (int i = 0; i < 6; ++i) {
    a(0, i) = 1.0;
    a(1, i) = i + 1.0;
  }
  Vec b{1.0, 4.0};
  auto res = bregman_minimize_divergence(q, a, b, 1e-12);
  REQUIRE(res.converged);
  CHECK(res.residual <= 1e-12 * 10);
  auto divergence = [&](const Vec& p) {
    double s = 0.0;
    for (int i = 0; i < 6; ++i) s += p[i] * std::log(p[i] / q[i]);
    return s;
  };
  double d_opt = divergence(res.p);
  // random feasible points: optimal point plus null-space perturbations
  Lcprg g(43);
  // orthonormal basis of the two constraint rows
  Vec u1(6, 1.0 / std::sqrt(6.0));
  Vec u2(6);
  {
    double dot = 0.0;
    for (int i = 0; i < 6; ++i) dot += (i + 1.0) * u1[i];
    double norm = 0.0;
    for (int i = 0; i < 6; ++i) {
      u2[i] = (i + 1.0) - dot * u1[i];
      norm += u2[i] * u2[i];
    }
    for (double& v : u2) v /= std::sqrt(norm);
  }
  int beaten = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Vec dir(6);
    for (int i = 0; i < 6; ++i) dir[i] = g.next_uniform() - 0.5;
    double d1 = 0.0, d2 = 0.0;
    for (int i = 0; i < 6; ++i) {
      d1 += dir[i] * u1[i];
      d2 += dir[i] * u2[i];
    }
    for (int i = 0; i < 6; ++i) dir[i] -= d1 * u1[i] + d2 * u2[i];
    Vec p = res.p;
    double tmax = 1e9;
    for (int i = 0; i < 6; ++i)
      if (dir[i] < 0.0) tmax = std::min(tmax, -0.9 * p[i] / dir[i]);
    double t = tmax * g.next_uniform();
    for (int i = 0; i < 6; ++i) p[i] += t * dir[i];
    bool feasible = true;
    double sum = 0.0, mean = 0.0;
    for (int i = 0; i < 6; ++i) {
      feasible = feasible && p[i] > 0.0;
      sum += p[i];
      mean += p[i] * (i + 1.0);
    }
    if (!feasible || std::fabs(sum - 1.0) > 1e-6 || std::fabs(mean - 4.0) > 1e-6) continue;
    if (divergence(p) >= d_opt - 1e-12) ++beaten;
    else FAIL("random feasible point with smaller divergence");
  }
  CHECK(beaten > 50);
}

TEST_CASE("bregman divergence is non-increasing across cycles after the first") {
  Vec q(6, 1.0 / 6.0);
  Matrix a(2, 6);
  for (int i = 0; i < 6; ++i) {
    a(0, i) = 1.0;
    a(1, i) = i + 1.0;
  }
  Vec b{1.0, 4.5};
  auto divergence = [&](const Vec& p) {
    double s = 0.0;
    for (int i = 0; i < 6; ++i) s += p[i] * std::log(p[i] / q[i]);
    return s;
  };
  double prev = 1e300;
  for (int cycles = 1; cycles <= 6; ++cycles) {
    auto res = bregman_minimize_divergence(q, a, b, 1e-15, cycles);
    double d = divergence(res.p);
    if (cycles > 1) CHECK(d <= prev + 1e-9);
    prev = d;
  }
}
