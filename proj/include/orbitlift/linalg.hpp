#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "orbitlift/error.hpp"

namespace orbitlift {

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  const std::vector<double>& data() const { return data_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    }
    return t;
  }

  double frobenius() const {
    double s = 0;
    for (auto x : data_) s += x * x;
    return std::sqrt(s);
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw Error("matrix shape mismatch");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double x = a(i, k);
        if (x == 0.0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += x * b(k, j);
      }
    }
    return c;
  }

  friend Matrix operator-(Matrix a, const Matrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw Error("matrix shape mismatch");
    for (std::size_t k = 0; k < a.data_.size(); ++k) a.data_[k] -= b.data_[k];
    return a;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

/// Eigenpairs of a symmetric matrix, values descending, vectors as columns.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls below
/// `tolerance` times the matrix norm.
inline SymmetricEigen jacobi_eigen(Matrix a, double tolerance = 1e-10, int max_sweeps = 100) {
  const auto n = a.rows();
  if (a.cols() != n) throw Error("eigendecomposition needs a square matrix");
  Matrix v = Matrix::identity(n);
  const double scale = std::max(a.frobenius(), 1e-300);
  auto off = [&] {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) s += 2 * a(i, j) * a(i, j);
    }
    return std::sqrt(s);
  };
  int sweep = 0;
  while (off() > tolerance * scale) {
    if (sweep++ == max_sweeps) throw Error("Jacobi eigendecomposition did not converge in 100 sweeps");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle from the stable tangent formula.
        const double theta = (a(q, q) - a(p, p)) / (2 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
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
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

/// Singular value decomposition of a square matrix from the two symmetric
/// eigenproblems a^T a (right vectors) and a a^T (left vectors). Left vectors
/// with positive singular values are taken as a v / sigma so that the pairs
/// stay matched inside degenerate singular subspaces.
struct Svd {
  std::vector<double> singular_values;  // descending
  Matrix left, right;                   // columns
  SymmetricEigen gram_right, gram_left; // eigensystems of a^T a and a a^T
};

inline Svd svd(const Matrix& a) {
  const auto n = a.rows();
  if (a.cols() != n) throw Error("SVD expects a square matrix");
  const auto at = a.transpose();
  Svd out;
  out.gram_right = jacobi_eigen(at * a);
  out.gram_left = jacobi_eigen(a * at);
  out.right = out.gram_right.vectors;
  out.left = Matrix(n, n);
  out.singular_values.resize(n);
  // sigma_k = |a v_k| keeps small singular values accurate; the square root
  // of a tiny Gram eigenvalue would not.
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double x = 0;
      for (std::size_t j = 0; j < n; ++j) x += a(i, j) * out.right(j, k);
      s += x * x;
    }
    out.singular_values[k] = std::sqrt(s);
  }
  const double top = n ? out.singular_values[0] : 0.0;
  std::size_t rank = 0;
  while (rank < n && out.singular_values[rank] > 1e-8 * std::max(top, 1.0)) ++rank;
  for (std::size_t k = 0; k < n; ++k) {
    if (k < rank) {
      for (std::size_t i = 0; i < n; ++i) {
        double x = 0;
        for (std::size_t j = 0; j < n; ++j) x += a(i, j) * out.right(j, k);
        out.left(i, k) = x / out.singular_values[k];
      }
    } else {
      out.singular_values[k] = 0.0;
      // Null directions of a a^T sit at the end of its descending spectrum.
      for (std::size_t i = 0; i < n; ++i) out.left(i, k) = out.gram_left.vectors(i, k);
    }
  }
  return out;
}

/// Orthogonal projectors onto each eigenspace whose eigenvalue exceeds
/// `floor`. Eigenvalues closer than `cluster` (relative to the largest) are
/// treated as one eigenspace.
inline std::vector<Matrix> eigenspace_projectors(const SymmetricEigen& e, double floor, double cluster = 1e-8) {
  const auto n = e.values.size();
  std::vector<Matrix> out;
  const double scale = n ? std::max(1.0, std::abs(e.values[0])) : 1.0;
  std::size_t k = 0;
  while (k < n && e.values[k] > floor * scale) {
    std::size_t end = k + 1;
    while (end < n && e.values[end - 1] - e.values[end] <= cluster * scale) ++end;
    Matrix p(n, n);
    for (std::size_t c = k; c < end; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) p(i, j) += e.vectors(i, c) * e.vectors(j, c);
      }
    }
    out.push_back(std::move(p));
    k = end;
  }
  return out;
}

}  // namespace orbitlift
