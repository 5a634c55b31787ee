#pragma once

// Matrix-vector kernels behind the operator backends.
//
// Every kernel exists twice: a plain serial loop kept as the reference, and
// an OpenMP version that partitions output entries across threads. Each output
// entry is reduced in the same order by both variants, so results are bitwise
// identical regardless of thread count. The unqualified entry points pick the
// parallel variant only above a work threshold.

#include <cstddef>
#include <cstdint>
#include <span>

namespace adjfree::kernels {

struct CsrView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const std::int64_t> row_ptr;
  std::span<const std::int32_t> col_idx;
  std::span<const double> values;
};

struct DenseView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const double> row_major;
};

namespace serial {
void csr_matvec(const CsrView& a, std::span<const double> x, std::span<double> y);
void dense_matvec(const DenseView& a, std::span<const double> x, std::span<double> y);
void dense_matvec_transposed(const DenseView& a, std::span<const double> y, std::span<double> x);
void cumsum(std::span<const double> x, std::span<double> y);
void reverse_cumsum(std::span<const double> y, std::span<double> x);
/// acc (n×n, row-major, upper triangle only) += weight · x xᵀ
void weighted_outer_upper(std::span<const double> x, double weight, std::span<double> acc);
}  // namespace serial

namespace parallel {
void csr_matvec(const CsrView& a, std::span<const double> x, std::span<double> y);
void dense_matvec(const DenseView& a, std::span<const double> x, std::span<double> y);
void dense_matvec_transposed(const DenseView& a, std::span<const double> y, std::span<double> x);
void weighted_outer_upper(std::span<const double> x, double weight, std::span<double> acc);
}  // namespace parallel

/// Work (multiply-adds) above which the dispatching entry points go parallel.
inline constexpr std::size_t kParallelWorkThreshold = std::size_t{1} << 16;

void csr_matvec(const CsrView& a, std::span<const double> x, std::span<double> y);
void dense_matvec(const DenseView& a, std::span<const double> x, std::span<double> y);
void dense_matvec_transposed(const DenseView& a, std::span<const double> y, std::span<double> x);

}  // namespace adjfree::kernels
