#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace adjfree {

using Vector = std::vector<double>;

/// Row-major dense matrix. Used for small operators, test oracles and the
/// spectral machinery; the solvers never require one.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  Vector column(std::size_t j) const;
  void set_column(std::size_t j, std::span<const double> values);

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  DenseMatrix transposed() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);
/// aᵀ·b without forming the transpose.
DenseMatrix multiply_transposed_left(const DenseMatrix& a, const DenseMatrix& b);
Vector multiply(const DenseMatrix& a, std::span<const double> x);
Vector multiply_transposed(const DenseMatrix& a, std::span<const double> y);

double frobenius_norm(const DenseMatrix& a);
double max_abs_entry(const DenseMatrix& a);

// Small vector helpers shared across modules.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double squared_norm(std::span<const double> a);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
Vector subtract(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> a);

}  // namespace adjfree
