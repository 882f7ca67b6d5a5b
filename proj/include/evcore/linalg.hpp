#pragma once

// Dense matrix substrate: Cholesky, LU, Givens QR, triangular solves.
// Problem dimensions in this library stay below ~20, so everything is a
// plain row-major dense matrix.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace evcore {

using Vec = std::vector<double>;

class Matrix {
 public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, fill) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Vec mul(const Vec& x) const {
    if (static_cast<int>(x.size()) != cols_) throw std::invalid_argument("Matrix::mul: size mismatch");
    Vec y(rows_, 0.0);
    for (int i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (int j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }

  Matrix mul(const Matrix& b) const {
    if (cols_ != b.rows_) throw std::invalid_argument("Matrix::mul: shape mismatch");
    Matrix c(rows_, b.cols_);
    for (int i = 0; i < rows_; ++i)
      for (int k = 0; k < cols_; ++k) {
        double aik = (*this)(i, k);
        if (aik == 0.0) continue;
        for (int j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }

  double frob_norm() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
  }

 private:
  int rows_, cols_;
  std::vector<double> a_;
};

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) - b(i, j);
  return c;
}

struct NotPositiveDefinite : std::runtime_error {
  explicit NotPositiveDefinite(int pivot)
      : std::runtime_error("cholesky: non-positive pivot at index " + std::to_string(pivot)),
        pivot_index(pivot) {}
  int pivot_index;
};

// Lower Cholesky factor, V = L L'. Square roots are taken pivot by pivot,
// just before each diagonal element is used for elimination.
inline Matrix cholesky(const Matrix& v) {
  const int n = v.rows();
  if (v.cols() != n) throw std::invalid_argument("cholesky: matrix must be square");
  Matrix l(n, n);
  for (int j = 0; j < n; ++j) {
    double d = v(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) throw NotPositiveDefinite(j);
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = v(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

struct LuFactors {
  Matrix l;               // unit lower triangular
  Matrix u;               // upper triangular
  std::vector<int> perm;  // row permutation (identity for the unpivoted variant)
  int sign = 1;
};

// Gaussian elimination in natural order; zero pivots are an error here.
inline LuFactors lu(const Matrix& a) {
  const int n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("lu: matrix must be square");
  Matrix w = a;
  Matrix l = Matrix::identity(n);
  for (int j = 0; j < n; ++j) {
    double piv = w(j, j);
    if (piv == 0.0) throw std::runtime_error("lu: zero pivot at index " + std::to_string(j));
    for (int i = j + 1; i < n; ++i) {
      double m = w(i, j) / piv;
      l(i, j) = m;
      for (int k = j; k < n; ++k) w(i, k) -= m * w(j, k);
    }
  }
  LuFactors f;
  f.l = std::move(l);
  f.u = std::move(w);
  f.perm.resize(n);
  for (int i = 0; i < n; ++i) f.perm[i] = i;
  return f;
}

// Partially pivoted variant: P A = L U, with the permutation reported.
// A numerically singular matrix is reported with its rank estimate.
inline LuFactors lu_pivoted(const Matrix& a, double rank_tol = 1e-12) {
  const int n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("lu_pivoted: matrix must be square");
  Matrix w = a;
  Matrix l = Matrix::identity(n);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  int sign = 1;
  double scale = w.frob_norm();
  for (int j = 0; j < n; ++j) {
    int p = j;
    for (int i = j + 1; i < n; ++i)
      if (std::fabs(w(i, j)) > std::fabs(w(p, j))) p = i;
    if (std::fabs(w(p, j)) <= rank_tol * (scale > 0 ? scale : 1.0)) {
      throw std::runtime_error("lu_pivoted: singular matrix, rank estimate " + std::to_string(j));
    }
    if (p != j) {
      sign = -sign;
      std::swap(perm[p], perm[j]);
      for (int k = 0; k < n; ++k) std::swap(w(p, k), w(j, k));
      for (int k = 0; k < j; ++k) std::swap(l(p, k), l(j, k));
    }
    for (int i = j + 1; i < n; ++i) {
      double m = w(i, j) / w(j, j);
      l(i, j) = m;
      for (int k = j; k < n; ++k) w(i, k) -= m * w(j, k);
    }
  }
  LuFactors f;
  f.l = std::move(l);
  f.u = std::move(w);
  f.perm = std::move(perm);
  f.sign = sign;
  return f;
}

// Overflow-safe rotation factors: returns (c, s) with c^2 + s^2 = 1 such
// that [c -s; s c]' applied to (x, y) zeroes the second component.
inline void givens_factors(double x, double y, double& c, double& s) {
  if (y == 0.0) {
    c = 1.0;
    s = 0.0;
  } else if (std::fabs(y) >= std::fabs(x)) {
    double t = -x / y;
    s = 1.0 / std::sqrt(1.0 + t * t);
    c = s * t;
  } else {
    double t = -y / x;
    c = 1.0 / std::sqrt(1.0 + t * t);
    s = c * t;
  }
}

struct QrFactors {
  Matrix q;  // m x m orthogonal
  Matrix r;  // m x n upper trapezoidal
};

// QR by a (1,2)(1,3)...(n-1,n) sequence of Givens rotations.
inline QrFactors qr_givens(const Matrix& a) {
  const int m = a.rows(), n = a.cols();
  if (m < n) throw std::invalid_argument("qr_givens: need rows >= cols");
  Matrix r = a;
  Matrix q = Matrix::identity(m);
  for (int j = 0; j < n; ++j) {
    for (int i = m - 1; i > j; --i) {
      double c, s;
      givens_factors(r(j, j), r(i, j), c, s);
      if (s == 0.0 && c == 1.0) continue;
      for (int k = 0; k < n; ++k) {
        double rj = r(j, k), ri = r(i, k);
        r(j, k) = c * rj - s * ri;
        r(i, k) = s * rj + c * ri;
      }
      r(i, j) = 0.0;
      for (int k = 0; k < m; ++k) {
        double qj = q(k, j), qi = q(k, i);
        q(k, j) = c * qj - s * qi;
        q(k, i) = s * qj + c * qi;
      }
    }
    // keep the R diagonal non-negative
    if (r(j, j) < 0.0) {
      for (int k = 0; k < n; ++k) r(j, k) = -r(j, k);
      for (int k = 0; k < m; ++k) q(k, j) = -q(k, j);
    }
  }
  return {std::move(q), std::move(r)};
}

inline Vec tri_solve_lower(const Matrix& l, const Vec& b) {
  const int n = l.rows();
  Vec x(b);
  for (int i = 0; i < n; ++i) {
    double s = x[i];
    for (int j = 0; j < i; ++j) s -= l(i, j) * x[j];
    if (l(i, i) == 0.0) throw std::runtime_error("tri_solve: zero diagonal at index " + std::to_string(i));
    x[i] = s / l(i, i);
  }
  return x;
}

inline Vec tri_solve_upper(const Matrix& u, const Vec& b) {
  const int n = u.rows();
  Vec x(b);
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int j = i + 1; j < n; ++j) s -= u(i, j) * x[j];
    if (u(i, i) == 0.0) throw std::runtime_error("tri_solve: zero diagonal at index " + std::to_string(i));
    x[i] = s / u(i, i);
  }
  return x;
}

// log det(V) = 2 sum log diag(L) for a Cholesky factor L of V.
inline double logdet_from_factor(const Matrix& l) {
  double s = 0.0;
  for (int i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0)) throw std::runtime_error("logdet_from_factor: non-positive diagonal");
    s += std::log(l(i, i));
  }
  return 2.0 * s;
}

// General small dense solve through the pivoted LU.
inline Vec solve(const Matrix& a, const Vec& b) {
  LuFactors f = lu_pivoted(a);
  const int n = a.rows();
  Vec pb(n);
  for (int i = 0; i < n; ++i) pb[i] = b[f.perm[i]];
  Vec y = tri_solve_lower(f.l, pb);
  return tri_solve_upper(f.u, y);
}

inline Matrix invert(const Matrix& a) {
  const int n = a.rows();
  Matrix inv(n, n);
  for (int j = 0; j < n; ++j) {
    Vec e(n, 0.0);
    e[j] = 1.0;
    Vec x = solve(a, e);
    for (int i = 0; i < n; ++i) inv(i, j) = x[i];
  }
  return inv;
}

}  // namespace evcore
