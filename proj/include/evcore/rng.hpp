#pragma once

// Deterministic pseudo- and quasi-random sources plus the non-uniform
// variate generators used by every stochastic operation in the library.
//
// Every sampler draws from an explicitly passed Lcprg, so a fixed
// (seed, call sequence) reproduces bit-identical streams.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "evcore/linalg.hpp"

namespace evcore {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d4a285fc2b2b4fULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Linear congruential generator x_{i+1} = (a x_i + c) mod 2^k.
// Construction rejects parameter triples violating the full-period
// conditions: gcd(c, m) = 1; a-1 divisible by every prime factor of m;
// a-1 divisible by 4 when m is.
class Lcprg {
 public:
  static constexpr std::uint64_t kDefaultA = 6364136223846793005ULL;
  static constexpr std::uint64_t kDefaultC = 1442695040888963407ULL;
  static constexpr int kDefaultLog2M = 63;

  Lcprg(std::uint64_t a, std::uint64_t c, int log2_m, std::uint64_t seed)
      : a_(a), c_(c), log2_m_(log2_m) {
    if (log2_m < 1 || log2_m > 63) throw std::invalid_argument("Lcprg: log2(m) must be in [1,63]");
    mask_ = (log2_m == 63) ? 0x7fffffffffffffffULL : ((1ULL << log2_m) - 1ULL);
    if ((c & 1ULL) == 0ULL) throw std::invalid_argument("Lcprg: c and m must be relatively prime");
    if (((a - 1ULL) & 1ULL) != 0ULL)
      throw std::invalid_argument("Lcprg: a-1 must be divisible by the prime factors of m");
    if (log2_m >= 2 && ((a - 1ULL) % 4ULL) != 0ULL)
      throw std::invalid_argument("Lcprg: a-1 must be a multiple of 4 when m is");
    x_ = seed & mask_;
  }

  explicit Lcprg(std::uint64_t seed) : Lcprg(kDefaultA, kDefaultC, kDefaultLog2M, seed) {}

  // Independent logical substream for parallel work: same (a, c, m), state
  // derived by mixing (seed, stream_id).
  static Lcprg substream(std::uint64_t seed, std::uint64_t stream_id) {
    return Lcprg(detail::splitmix64(seed ^ detail::splitmix64(stream_id + 0x9e3779b97f4a7c15ULL)));
  }

  std::uint64_t next_raw() {
    x_ = (a_ * x_ + c_) & mask_;
    ++draw_count_;
    return x_;
  }

  // x_{i+1} / m in [0, 1)
  double next_uniform() {
    return static_cast<double>(next_raw()) * std::ldexp(1.0, -log2_m_);
  }

  // (0, 1] variant for logarithms
  double next_uniform_pos() { return 1.0 - next_uniform(); }

  std::uint64_t state() const { return x_; }
  std::uint64_t draw_count() const { return draw_count_; }
  std::uint64_t modulus_mask() const { return mask_; }

 private:
  std::uint64_t a_, c_, x_ = 0;
  int log2_m_;
  std::uint64_t mask_;
  std::uint64_t draw_count_ = 0;
};

// r_b(i): digit reversal of i in base b, the van der Corput radical inverse.
inline double radical_inverse(std::uint64_t i, unsigned b) {
  if (i < 1) throw std::invalid_argument("radical_inverse: index must be >= 1");
  if (b < 2) throw std::invalid_argument("radical_inverse: base must be >= 2");
  double r = 0.0;
  double denom = static_cast<double>(b);
  while (i > 0) {
    r += static_cast<double>(i % b) / denom;
    i /= b;
    denom *= static_cast<double>(b);
  }
  return r;
}

inline std::vector<unsigned> first_primes(int count) {
  std::vector<unsigned> primes;
  unsigned cand = 2;
  while (static_cast<int>(primes.size()) < count) {
    bool ok = true;
    for (unsigned p : primes) {
      if (p * p > cand) break;
      if (cand % p == 0) { ok = false; break; }
    }
    if (ok) primes.push_back(cand);
    ++cand;
  }
  return primes;
}

// Halton-Hammersley point set in [0,1)^d:
//   x^i = [i/n, r_{p(1)}(i), ..., r_{p(d-1)}(i)],  i = 1..n-1.
// An optional Cranley-Patterson shift makes scrambled replicates.
class HaltonSeq {
 public:
  HaltonSeq(int d, std::uint64_t n, std::vector<unsigned> primes = {})
      : d_(d), n_(n), i_(1), primes_(std::move(primes)) {
    if (d < 1) throw std::invalid_argument("HaltonSeq: dimension must be >= 1");
    if (primes_.empty()) primes_ = first_primes(d - 1);
    if (static_cast<int>(primes_.size()) != d - 1)
      throw std::invalid_argument("HaltonSeq: need d-1 primes");
    for (size_t k = 0; k < primes_.size(); ++k)
      for (size_t l = k + 1; l < primes_.size(); ++l)
        if (primes_[k] == primes_[l]) throw std::invalid_argument("HaltonSeq: primes must be distinct");
    shift_.assign(d, 0.0);
  }

  void set_shift(const Vec& shift) {
    if (static_cast<int>(shift.size()) != d_) throw std::invalid_argument("HaltonSeq: shift size");
    shift_ = shift;
  }

  bool exhausted() const { return i_ >= n_; }
  std::uint64_t index() const { return i_; }

  Vec next_point() {
    if (exhausted()) throw std::runtime_error("HaltonSeq: index exhausted");
    Vec x(d_);
    x[0] = static_cast<double>(i_) / static_cast<double>(n_);
    for (int k = 1; k < d_; ++k) x[k] = radical_inverse(i_, primes_[k - 1]);
    for (int k = 0; k < d_; ++k) {
      x[k] += shift_[k];
      x[k] -= std::floor(x[k]);
    }
    ++i_;
    return x;
  }

 private:
  int d_;
  std::uint64_t n_, i_;
  std::vector<unsigned> primes_;
  Vec shift_;
};

// ---- non-uniform generators ------------------------------------------------

// x = r cos(theta), y = r sin(theta) with theta = 2 pi u, r = sqrt(-2 ln v)
inline std::pair<double, double> box_muller(double u, double v) {
  const double theta = 2.0 * M_PI * u;
  const double r = std::sqrt(-2.0 * std::log(v));
  return {r * std::cos(theta), r * std::sin(theta)};
}

// t = (-1/lambda) ln u
inline double exponential_from_u(double u, double lambda) { return -std::log(u) / lambda; }

// x = a + b tan(pi (u - 1/2))
inline double cauchy_from_u(double u, double a, double b) {
  return a + b * std::tan(M_PI * (u - 0.5));
}

inline std::pair<double, double> sample_normal_pair(Lcprg& rng) {
  return box_muller(rng.next_uniform(), rng.next_uniform_pos());
}

inline Vec sample_normal_vec(Lcprg& rng, int d) {
  Vec z(d);
  for (int i = 0; i + 1 < d; i += 2) {
    auto [x, y] = sample_normal_pair(rng);
    z[i] = x;
    z[i + 1] = y;
  }
  if (d % 2 == 1) z[d - 1] = sample_normal_pair(rng).first;
  return z;
}

inline double sample_exponential(Lcprg& rng, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("sample_exponential: rate must be positive");
  return exponential_from_u(rng.next_uniform_pos(), lambda);
}

inline double sample_cauchy(Lcprg& rng, double a, double b) {
  if (!(b > 0.0)) throw std::invalid_argument("sample_cauchy: scale must be positive");
  return cauchy_from_u(rng.next_uniform(), a, b);
}

namespace detail {

// Ahrens-Dieter envelope for shape c < 1: power density on [0,1], an
// exponential tail beyond.
inline double gamma_small_shape(Lcprg& rng, double c) {
  const double b = 1.0 + c * std::exp(-1.0);
  for (;;) {
    const double p = b * rng.next_uniform_pos();
    const double v = rng.next_uniform_pos();
    if (p <= 1.0) {
      const double x = std::pow(p, 1.0 / c);
      if (v <= std::exp(-x)) return x;
    } else {
      const double x = -std::log((b - p) / c + 1e-320);
      if (v <= std::pow(x, c - 1.0)) return x;
    }
  }
}

// t_2-envelope rejection for shape c > 1 (Best's XG scheme): the auxiliary
// variate sqrt(cc/w)(u - 1/2) has a Student-t law with 2 degrees of freedom.
inline double gamma_t2_envelope(Lcprg& rng, double c) {
  const double b = c - 1.0;
  const double cc = 3.0 * c - 0.75;
  for (;;) {
    const double u = rng.next_uniform_pos();
    const double v = rng.next_uniform_pos();
    const double w = u * (1.0 - u);
    if (w <= 0.0) continue;
    const double y = std::sqrt(cc / w) * (u - 0.5);
    const double x = b + y;
    if (x < 0.0) continue;
    const double z = 64.0 * w * w * w * v * v;
    if (z <= 1.0 - 2.0 * y * y / x) return x;
    if (std::log(z) <= 2.0 * (b * std::log(x / b) - y)) return x;
  }
}

}  // namespace detail

// G(c, 1) variate; scale by 1/b externally for G(c, b).
inline double sample_gamma(Lcprg& rng, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("sample_gamma: shape must be positive");
  if (c < 1.0) return detail::gamma_small_shape(rng, c);
  if (c == 1.0) return sample_exponential(rng, 1.0);
  return detail::gamma_t2_envelope(rng, c);
}

// Cauchy-envelope variant for c > 1, kept as an independent cross-check of
// the t_2 route.
inline double sample_gamma_cauchy_envelope(Lcprg& rng, double c) {
  if (!(c > 1.0)) throw std::invalid_argument("sample_gamma_cauchy_envelope: need shape > 1");
  const double b = c - 1.0;
  const double s = std::sqrt(2.0 * c - 1.0);
  for (;;) {
    const double y = std::tan(M_PI * rng.next_uniform());
    const double x = s * y + b;
    if (x <= 0.0) continue;
    const double accept = std::exp(b * std::log(x / b) - x + b) * (1.0 + y * y);
    if (rng.next_uniform_pos() <= accept) return x;
  }
}

inline double sample_chi2(Lcprg& rng, double dof) { return 2.0 * sample_gamma(rng, 0.5 * dof); }

// y = x / 1'x with independent x_k ~ G(a_k, 1); y lies on the simplex.
inline Vec sample_dirichlet(Lcprg& rng, const Vec& a) {
  Vec y(a.size());
  double total = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    if (!(a[k] > 0.0)) throw std::invalid_argument("sample_dirichlet: parameters must be positive");
    y[k] = sample_gamma(rng, a[k]);
    total += y[k];
  }
  for (double& v : y) v /= total;
  return y;
}

// Upper-triangular factor U with W = U'U ~ Wishart(n, V = C'C).
// B has standard normals above the diagonal and sqrt(chi^2(n-i+1)) on it.
inline Matrix sample_wishart_cholesky(Lcprg& rng, int n, const Matrix& c_upper) {
  const int d = c_upper.rows();
  if (c_upper.cols() != d) throw std::invalid_argument("sample_wishart_cholesky: factor must be square");
  if (n < d) throw std::invalid_argument("sample_wishart_cholesky: need degrees >= dimension");
  Matrix b(d, d);
  for (int i = 0; i < d; ++i) {
    b(i, i) = std::sqrt(sample_chi2(rng, static_cast<double>(n - i)));
    for (int j = i + 1; j < d; ++j) b(i, j) = sample_normal_pair(rng).first;
  }
  return b.mul(c_upper);
}

// Counting consecutive lambda-exponential arrivals up to total time 1.
inline long sample_poisson(Lcprg& rng, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("sample_poisson: rate must be non-negative");
  if (lambda == 0.0) return 0;
  const double limit = std::exp(-lambda);
  long k = 0;
  double prod = rng.next_uniform_pos();
  while (prod >= limit) {
    prod *= rng.next_uniform_pos();
    ++k;
  }
  return k;
}

inline int sample_categorical(Lcprg& rng, const Vec& theta) {
  double u = rng.next_uniform();
  double acc = 0.0;
  for (size_t k = 0; k + 1 < theta.size(); ++k) {
    acc += theta[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(theta.size()) - 1;
}

inline std::vector<long> sample_multinomial(Lcprg& rng, long n, const Vec& theta) {
  std::vector<long> x(theta.size(), 0);
  for (long i = 0; i < n; ++i) ++x[sample_categorical(rng, theta)];
  return x;
}

}  // namespace evcore
