#include "adjfree/kernels.hpp"

#include <omp.h>

namespace adjfree::kernels {

namespace serial {

void csr_matvec(const CsrView& a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    double sum = 0.0;
    for (auto p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      sum += a.values[p] * x[a.col_idx[p]];
    }
    y[i] = sum;
  }
}

void dense_matvec(const DenseView& a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* row = a.row_major.data() + i * a.cols;
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) sum += row[j] * x[j];
    y[i] = sum;
  }
}

void dense_matvec_transposed(const DenseView& a, std::span<const double> y, std::span<double> x) {
  for (std::size_t j = 0; j < a.cols; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) sum += a.row_major[i * a.cols + j] * y[i];
    x[j] = sum;
  }
}

void cumsum(std::span<const double> x, std::span<double> y) {
  double running = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    running += x[i];
    y[i] = running;
  }
}

void reverse_cumsum(std::span<const double> y, std::span<double> x) {
  double running = 0.0;
  for (std::size_t i = y.size(); i-- > 0;) {
    running += y[i];
    x[i] = running;
  }
}

void weighted_outer_upper(std::span<const double> x, double weight, std::span<double> acc) {
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = weight * x[i];
    if (wi == 0.0) continue;
    double* row = acc.data() + i * n;
    for (std::size_t j = i; j < n; ++j) row[j] += wi * x[j];
  }
}

}  // namespace serial

namespace parallel {

void csr_matvec(const CsrView& a, std::span<const double> x, std::span<double> y) {
  const auto rows = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    double sum = 0.0;
    for (auto p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      sum += a.values[p] * x[a.col_idx[p]];
    }
    y[i] = sum;
  }
}

void dense_matvec(const DenseView& a, std::span<const double> x, std::span<double> y) {
  const auto rows = static_cast<std::int64_t>(a.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* row = a.row_major.data() + i * a.cols;
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) sum += row[j] * x[j];
    y[i] = sum;
  }
}

void dense_matvec_transposed(const DenseView& a, std::span<const double> y, std::span<double> x) {
  const auto cols = static_cast<std::int64_t>(a.cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < cols; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) sum += a.row_major[i * a.cols + j] * y[i];
    x[j] = sum;
  }
}

void weighted_outer_upper(std::span<const double> x, double weight, std::span<double> acc) {
  const auto n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) {
    const double wi = weight * x[i];
    if (wi == 0.0) continue;
    double* row = acc.data() + i * n;
    for (std::int64_t j = i; j < n; ++j) row[j] += wi * x[j];
  }
}

}  // namespace parallel

namespace {
bool go_parallel(std::size_t work) {
  return work >= kParallelWorkThreshold && omp_get_max_threads() > 1 && !omp_in_parallel();
}
}  // namespace

void csr_matvec(const CsrView& a, std::span<const double> x, std::span<double> y) {
  if (go_parallel(a.values.size())) {
    parallel::csr_matvec(a, x, y);
  } else {
    serial::csr_matvec(a, x, y);
  }
}

void dense_matvec(const DenseView& a, std::span<const double> x, std::span<double> y) {
  if (go_parallel(a.rows * a.cols)) {
    parallel::dense_matvec(a, x, y);
  } else {
    serial::dense_matvec(a, x, y);
  }
}

void dense_matvec_transposed(const DenseView& a, std::span<const double> y, std::span<double> x) {
  if (go_parallel(a.rows * a.cols)) {
    parallel::dense_matvec_transposed(a, y, x);
  } else {
    serial::dense_matvec_transposed(a, y, x);
  }
}

}  // namespace adjfree::kernels
