#ifndef DTN_LINALG_HPP
#define DTN_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace dtn {

/// Dense row-major matrix of doubles.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_rows(std::size_t rows, std::size_t cols, std::span<const double> values) {
    if (values.size() != rows * cols) throw std::invalid_argument("matrix size mismatch");
    Matrix m(rows, cols);
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
  }

  double &operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::vector<double> col(std::size_t j) const {
    std::vector<double> c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }
  const std::vector<double> &values() const { return data_; }

private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

inline Matrix transpose(const Matrix &a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix operator*(const Matrix &a, const Matrix &b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matrix product shape mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline std::vector<double> operator*(const Matrix &a, std::span<const double> v) {
  if (a.cols() != v.size()) throw std::invalid_argument("matrix-vector shape mismatch");
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    out[i] = std::inner_product(r.begin(), r.end(), v.begin(), 0.0);
  }
  return out;
}

inline Matrix operator+(Matrix a, const Matrix &b) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) += b(i, j);
  return a;
}

inline Matrix operator-(Matrix a, const Matrix &b) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) -= b(i, j);
  return a;
}

inline Matrix operator*(double s, Matrix a) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (double &x : a.row(i)) x *= s;
  return a;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double max_abs(const Matrix &a) {
  double m = 0;
  for (double x : a.values()) m = std::max(m, std::fabs(x));
  return m;
}

/// Quadratic form x^T A y.
inline double bilinear(const Matrix &a, std::span<const double> x, std::span<const double> y) {
  return dot(x, a * y);
}

/// Eigen-decomposition of a symmetric matrix; eigenvectors are the columns of `vectors`.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};

/// Cyclic Jacobi rotations; values sorted ascending.
inline SymmetricEigen jacobi_eigen(Matrix a, int max_sweeps = 100) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("jacobi_eigen needs a square matrix");
  Matrix v = Matrix::identity(n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0, diag = 0;
    for (std::size_t i = 0; i < n; ++i) {
      diag += a(i, i) * a(i, i);
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off <= 1e-32 * diag || off == 0.0) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, c) = v(k, order[c]);
  }
  return out;
}

/// Full Householder QR: a = q r with q orthogonal (m x m) and r upper trapezoidal (m x n).
struct QR {
  Matrix q, r;
};

inline QR householder_qr(const Matrix &a) {
  const std::size_t m = a.rows(), n = a.cols();
  Matrix r = a, q = Matrix::identity(m);
  std::vector<double> v(m);
  for (std::size_t k = 0; k < std::min(m - 1 + (m == 0), n) && k < m; ++k) {
    double alpha = 0;
    for (std::size_t i = k; i < m; ++i) alpha += r(i, k) * r(i, k);
    alpha = std::sqrt(alpha);
    if (alpha == 0.0) continue;
    if (r(k, k) > 0) alpha = -alpha;
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t i = k; i < m; ++i) v[i] = r(i, k);
    v[k] -= alpha;
    double vnorm2 = 0;
    for (std::size_t i = k; i < m; ++i) vnorm2 += v[i] * v[i];
    if (vnorm2 == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t i = k; i < m; ++i) s += v[i] * r(i, j);
      s *= 2.0 / vnorm2;
      for (std::size_t i = k; i < m; ++i) r(i, j) -= s * v[i];
    }
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0;
      for (std::size_t i = k; i < m; ++i) s += v[i] * q(j, i);
      s *= 2.0 / vnorm2;
      for (std::size_t i = k; i < m; ++i) q(j, i) -= s * v[i];
    }
  }
  return {q, r};
}

/// LU factorisation with partial pivoting, reusable for many right-hand sides.
class LU {
public:
  explicit LU(Matrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
    const std::size_t n = lu_.rows();
    if (lu_.cols() != n) throw std::invalid_argument("LU needs a square matrix");
    std::iota(perm_.begin(), perm_.end(), 0);
    const double scale = std::max(max_abs(lu_), 1e-300);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::fabs(lu_(i, k)) > std::fabs(lu_(p, k))) p = i;
      if (std::fabs(lu_(p, k)) <= 1e-300 * scale) throw NumericalError("singular matrix in LU");
      if (p != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
        std::swap(perm_[k], perm_[p]);
      }
      for (std::size_t i = k + 1; i < n; ++i) {
        const double f = lu_(i, k) / lu_(k, k);
        lu_(i, k) = f;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
  }

  std::vector<double> solve(std::span<const double> b) const {
    const std::size_t n = lu_.rows();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
      x[i] /= lu_(i, i);
    }
    return x;
  }

  Matrix solve(const Matrix &b) const {
    Matrix x(b.rows(), b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) {
      const auto col = solve(b.col(c));
      for (std::size_t i = 0; i < b.rows(); ++i) x(i, c) = col[i];
    }
    return x;
  }

private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
};

inline std::vector<double> solve(const Matrix &a, std::span<const double> b) { return LU(a).solve(b); }

/// Orthonormal basis (columns) of the null space of a full-row-rank j, via QR of j^T.
inline Matrix null_space(const Matrix &j) {
  const std::size_t m = j.rows(), n = j.cols();
  const auto qr = householder_qr(transpose(j));
  Matrix k(n, n - m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = m; c < n; ++c) k(i, c - m) = qr.q(i, c);
  return k;
}

/// Numerical rank from the diagonal of the QR factor of a^T.
inline std::size_t row_rank(const Matrix &a, double rel_tol = 1e-12) {
  const auto qr = householder_qr(transpose(a));
  double big = 0;
  for (std::size_t i = 0; i < std::min(qr.r.rows(), qr.r.cols()); ++i) big = std::max(big, std::fabs(qr.r(i, i)));
  std::size_t rank = 0;
  for (std::size_t i = 0; i < std::min(qr.r.rows(), qr.r.cols()); ++i)
    if (std::fabs(qr.r(i, i)) > rel_tol * big) ++rank;
  return rank;
}

/// Matrix exponential by scaling and squaring of a Taylor polynomial.
inline Matrix expm(const Matrix &a) {
  const std::size_t n = a.rows();
  double norm = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double rs = 0;
    for (std::size_t j = 0; j < n; ++j) rs += std::fabs(a(i, j));
    norm = std::max(norm, rs);
  }
  int squarings = 0;
  while (norm > 0.25) {
    norm *= 0.5;
    ++squarings;
  }
  const Matrix scaled = std::ldexp(1.0, -squarings) * a;
  Matrix result = Matrix::identity(n), term = Matrix::identity(n);
  for (int k = 1; k <= 24; ++k) {
    term = (1.0 / k) * (term * scaled);
    result = result + term;
    if (max_abs(term) < 1e-18 * max_abs(result)) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

} // namespace dtn

#endif // DTN_LINALG_HPP
