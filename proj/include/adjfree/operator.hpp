#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "adjfree/dense.hpp"
#include "adjfree/rng.hpp"

namespace adjfree {

/// Compressed sparse row storage. Column indices are strictly increasing
/// within each row; explicit zeros are allowed.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int64_t> row_ptr{0};
  std::vector<std::int32_t> col_idx;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return values.size(); }

  /// Throws InvalidArgument when any structural invariant is violated.
  void validate() const;

  /// Builds from (row, col, value) triplets, 0-based. Duplicates are summed.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols,
                                 std::vector<std::tuple<std::size_t, std::size_t, double>> triplets);
  static CsrMatrix identity(std::size_t n);
  static CsrMatrix from_dense(const DenseMatrix& a);

  CsrMatrix transposed() const;
  DenseMatrix to_dense() const;

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

enum class BackendKind { Dense, Csr, CumSum, SquareEmbedded };

enum class Capability { ForwardOnly, WithAdjoint };

/// Handle to a linear map A: R^d -> R^m that can be evaluated on vectors.
///
/// Handles are cheap to copy; copies share storage and the application
/// counters. The counters are atomic, so a handle may be applied from several
/// threads at once. Backends with a stored matrix may also expose Aᵀ, which
/// only the baseline solvers and diagnostics use.
class LinearOperator {
 public:
  static LinearOperator dense(DenseMatrix a, Capability cap = Capability::WithAdjoint);
  static LinearOperator csr(CsrMatrix a, Capability cap = Capability::WithAdjoint);
  /// (Av)_i = v_1 + ... + v_i, evaluated as a running sum.
  static LinearOperator cumsum(std::size_t n, Capability cap = Capability::WithAdjoint);
  /// Zero-pads a rectangular operator to square: [A; 0] when m < d and
  /// [A 0] when m > d. A square input is returned unchanged.
  static LinearOperator square_embedding(const LinearOperator& inner);

  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;
  BackendKind backend() const noexcept;
  bool adjoint_available() const noexcept;

  /// Same storage, own counters, adjoint disabled.
  LinearOperator forward_only() const;

  void apply(std::span<const double> v, std::span<double> out) const;
  Vector apply(std::span<const double> v) const;
  void apply_adjoint(std::span<const double> w, std::span<double> out) const;
  Vector apply_adjoint(std::span<const double> w) const;

  std::uint64_t apply_count() const noexcept;
  std::uint64_t adjoint_count() const noexcept;
  void reset_counters() const noexcept;

  /// The wrapped operator of a SquareEmbedded handle, nullptr otherwise.
  const LinearOperator* embedded_inner() const noexcept;
  const DenseMatrix* dense_storage() const noexcept;
  const CsrMatrix* csr_storage() const noexcept;

 private:
  struct Backend;
  struct Counters {
    std::atomic<std::uint64_t> forward{0};
    std::atomic<std::uint64_t> adjoint{0};
  };

  LinearOperator(std::shared_ptr<const Backend> backend, bool adjoint);

  std::shared_ptr<const Backend> backend_;
  std::shared_ptr<Counters> counters_;
  bool adjoint_ = false;
};

/// Builds a dense copy by applying the operator to every basis vector. Only
/// meant for desk-scale analysis and test oracles; refuses SquareEmbedded
/// handles, whose whole point is never to be materialized.
DenseMatrix materialize(const LinearOperator& op);

/// ‖A e_j‖ for every column, via d forward applications.
Vector column_norms(const LinearOperator& op);

/// max ‖Ax‖/‖x‖ over Gaussian probes. A lower bound on ‖A‖; scale it up
/// before deriving stepsizes from it.
double estimate_operator_norm(const LinearOperator& op, RngState& rng, std::size_t n_samples);

struct NoiseRecord {
  Vector r;
  /// Components of r in rg(A) and its orthogonal complement, when computed.
  std::optional<Vector> r_range;
  std::optional<Vector> r_perp;
  /// ‖Aᵀ r_range‖ (equals ‖Aᵀ r‖), when computed.
  std::optional<double> range_noise_norm;
};

struct Problem {
  LinearOperator op;
  Vector rhs;
  std::optional<Vector> ground_truth;
  std::optional<NoiseRecord> noise;

  double noise_norm() const;
  /// Throws DimensionMismatch / InvalidArgument when the parts do not fit.
  void validate() const;
};

/// Square embedding of a rectangular problem: rows of zeros (m < d, rhs padded
/// with zeros) or columns of zeros (m > d, ground truth padded with zeros).
Problem embed_square(const Problem& p);

/// Maps an iterate of an embedded problem back to the original unknowns.
Vector restrict_solution(const LinearOperator& op, std::span<const double> v);

}  // namespace adjfree
