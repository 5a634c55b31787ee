#include "adjfree/dense.hpp"

#include <algorithm>
#include <cmath>

#include "adjfree/errors.hpp"
#include "adjfree/kernels.hpp"

namespace adjfree {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::DimensionMismatch, "dense matrix storage does not match shape");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix eye(n, n);
  for (std::size_t i = 0; i < n; ++i) eye(i, i) = 1.0;
  return eye;
}

Vector DenseMatrix::column(std::size_t j) const {
  Vector out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
  return out;
}

void DenseMatrix::set_column(std::size_t j, std::span<const double> values) {
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
}

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorCode::DimensionMismatch, "matrix product");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  }
  return c;
}

DenseMatrix multiply_transposed_left(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw Error(ErrorCode::DimensionMismatch, "matrix product aT*b");
  DenseMatrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
    }
  }
  return c;
}

Vector multiply(const DenseMatrix& a, std::span<const double> x) {
  if (x.size() != a.cols()) throw Error(ErrorCode::DimensionMismatch, "matrix-vector product");
  Vector y(a.rows());
  kernels::serial::dense_matvec({a.rows(), a.cols(), a.data()}, x, y);
  return y;
}

Vector multiply_transposed(const DenseMatrix& a, std::span<const double> y) {
  if (y.size() != a.rows()) throw Error(ErrorCode::DimensionMismatch, "transposed product");
  Vector x(a.cols());
  kernels::serial::dense_matvec_transposed({a.rows(), a.cols(), a.data()}, y, x);
  return x;
}

double frobenius_norm(const DenseMatrix& a) { return norm2(a.data()); }

double max_abs_entry(const DenseMatrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

double norm2(std::span<const double> a) {
  // Scaled accumulation so that very large or very small entries neither
  // overflow nor underflow.
  double scale = 0.0;
  double ssq = 1.0;
  for (double v : a) {
    if (v == 0.0) continue;
    const double av = std::abs(v);
    if (scale < av) {
      ssq = 1.0 + ssq * (scale / av) * (scale / av);
      scale = av;
    } else {
      ssq += (av / scale) * (av / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vector subtract(std::span<const double> a, std::span<const double> b) {
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace adjfree
