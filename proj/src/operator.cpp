#include "adjfree/operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>

#include "adjfree/errors.hpp"
#include "adjfree/kernels.hpp"

namespace adjfree {

// ---------------------------------------------------------------- CsrMatrix

void CsrMatrix::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, "csr: " + what); };
  if (row_ptr.size() != rows + 1) fail("row_ptr length must be rows + 1");
  if (row_ptr.front() != 0) fail("row_ptr must start at 0");
  if (static_cast<std::size_t>(row_ptr.back()) != values.size()) fail("row_ptr must end at nnz");
  if (col_idx.size() != values.size()) fail("col_idx and values differ in length");
  if (cols > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) fail("too many columns");
  for (std::size_t i = 0; i < rows; ++i) {
    if (row_ptr[i] > row_ptr[i + 1]) fail("row_ptr must be non-decreasing");
    for (auto p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
      if (col_idx[p] < 0 || static_cast<std::size_t>(col_idx[p]) >= cols) fail("column index out of range");
      if (p > row_ptr[i] && col_idx[p] <= col_idx[p - 1]) fail("column indices must increase within a row");
    }
  }
}

CsrMatrix CsrMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                   std::vector<std::tuple<std::size_t, std::size_t, double>> triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  CsrMatrix out;
  out.rows = rows;
  out.cols = cols;
  out.row_ptr.assign(rows + 1, 0);
  out.col_idx.reserve(triplets.size());
  out.values.reserve(triplets.size());
  std::size_t prev_row = rows;
  std::size_t prev_col = cols;
  for (const auto& [i, j, v] : triplets) {
    if (i >= rows || j >= cols) {
      throw Error(ErrorCode::InvalidArgument, "triplet index out of range");
    }
    if (i == prev_row && j == prev_col) {
      out.values.back() += v;
      continue;
    }
    out.col_idx.push_back(static_cast<std::int32_t>(j));
    out.values.push_back(v);
    ++out.row_ptr[i + 1];
    prev_row = i;
    prev_col = j;
  }
  for (std::size_t i = 0; i < rows; ++i) out.row_ptr[i + 1] += out.row_ptr[i];
  return out;
}

CsrMatrix CsrMatrix::identity(std::size_t n) {
  CsrMatrix out;
  out.rows = out.cols = n;
  out.row_ptr.resize(n + 1);
  out.col_idx.resize(n);
  out.values.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    out.row_ptr[i + 1] = static_cast<std::int64_t>(i + 1);
    out.col_idx[i] = static_cast<std::int32_t>(i);
  }
  return out;
}

CsrMatrix CsrMatrix::from_dense(const DenseMatrix& a) {
  CsrMatrix out;
  out.rows = a.rows();
  out.cols = a.cols();
  out.row_ptr.assign(a.rows() + 1, 0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (a(i, j) != 0.0) {
        out.col_idx.push_back(static_cast<std::int32_t>(j));
        out.values.push_back(a(i, j));
      }
    }
    out.row_ptr[i + 1] = static_cast<std::int64_t>(out.values.size());
  }
  return out;
}

CsrMatrix CsrMatrix::transposed() const {
  CsrMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  t.col_idx.resize(nnz());
  t.values.resize(nnz());
  for (auto j : col_idx) ++t.row_ptr[j + 1];
  for (std::size_t j = 0; j < cols; ++j) t.row_ptr[j + 1] += t.row_ptr[j];
  std::vector<std::int64_t> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
  // Rows are visited in order, so each transposed row receives increasing columns.
  for (std::size_t i = 0; i < rows; ++i) {
    for (auto p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
      const auto dst = next[col_idx[p]]++;
      t.col_idx[dst] = static_cast<std::int32_t>(i);
      t.values[dst] = values[p];
    }
  }
  return t;
}

DenseMatrix CsrMatrix::to_dense() const {
  DenseMatrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (auto p = row_ptr[i]; p < row_ptr[i + 1]; ++p) out(i, col_idx[p]) += values[p];
  return out;
}

// ---------------------------------------------------------------- backends

namespace {

struct DenseBackend {
  DenseMatrix a;
};

struct CsrBackend {
  CsrMatrix a;
  std::optional<CsrMatrix> at;  // built only when the adjoint is enabled

  kernels::CsrView view() const { return {a.rows, a.cols, a.row_ptr, a.col_idx, a.values}; }
  kernels::CsrView transposed_view() const {
    return {at->rows, at->cols, at->row_ptr, at->col_idx, at->values};
  }
};

struct CumSumBackend {
  std::size_t n;
};

struct EmbeddedBackend {
  LinearOperator inner;
  std::size_t n;
};

}  // namespace

struct LinearOperator::Backend {
  std::variant<DenseBackend, CsrBackend, CumSumBackend, EmbeddedBackend> impl;
  std::size_t rows;
  std::size_t cols;
  bool supports_adjoint;
};

LinearOperator::LinearOperator(std::shared_ptr<const Backend> backend, bool adjoint)
    : backend_(std::move(backend)),
      counters_(std::make_shared<Counters>()),
      adjoint_(adjoint && backend_->supports_adjoint) {}

LinearOperator LinearOperator::dense(DenseMatrix a, Capability cap) {
  if (a.rows() == 0 || a.cols() == 0) throw Error(ErrorCode::InvalidArgument, "empty operator");
  const auto rows = a.rows();
  const auto cols = a.cols();
  auto backend = std::make_shared<Backend>(Backend{DenseBackend{std::move(a)}, rows, cols, true});
  return LinearOperator(std::move(backend), cap == Capability::WithAdjoint);
}

LinearOperator LinearOperator::csr(CsrMatrix a, Capability cap) {
  if (a.rows == 0 || a.cols == 0) throw Error(ErrorCode::InvalidArgument, "empty operator");
  a.validate();
  const auto rows = a.rows;
  const auto cols = a.cols;
  CsrBackend storage{std::move(a), std::nullopt};
  if (cap == Capability::WithAdjoint) storage.at = storage.a.transposed();
  auto backend = std::make_shared<Backend>(Backend{std::move(storage), rows, cols, cap == Capability::WithAdjoint});
  return LinearOperator(std::move(backend), cap == Capability::WithAdjoint);
}

LinearOperator LinearOperator::cumsum(std::size_t n, Capability cap) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty operator");
  auto backend = std::make_shared<Backend>(Backend{CumSumBackend{n}, n, n, true});
  return LinearOperator(std::move(backend), cap == Capability::WithAdjoint);
}

LinearOperator LinearOperator::square_embedding(const LinearOperator& inner) {
  if (inner.rows() == inner.cols()) return inner;
  const std::size_t n = std::max(inner.rows(), inner.cols());
  // The copy shares the original handle's counters.
  const bool adjoint = inner.adjoint_available();
  auto backend = std::make_shared<Backend>(Backend{EmbeddedBackend{inner, n}, n, n, adjoint});
  return LinearOperator(std::move(backend), adjoint);
}

std::size_t LinearOperator::rows() const noexcept { return backend_->rows; }
std::size_t LinearOperator::cols() const noexcept { return backend_->cols; }
bool LinearOperator::adjoint_available() const noexcept { return adjoint_; }

BackendKind LinearOperator::backend() const noexcept {
  return std::visit(
      [](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, DenseBackend>) return BackendKind::Dense;
        else if constexpr (std::is_same_v<T, CsrBackend>) return BackendKind::Csr;
        else if constexpr (std::is_same_v<T, CumSumBackend>) return BackendKind::CumSum;
        else return BackendKind::SquareEmbedded;
      },
      backend_->impl);
}

LinearOperator LinearOperator::forward_only() const { return LinearOperator(backend_, false); }

void LinearOperator::apply(std::span<const double> v, std::span<double> out) const {
  if (v.size() != cols() || out.size() != rows()) {
    throw Error(ErrorCode::DimensionMismatch,
                "apply expects input length " + std::to_string(cols()) + ", got " + std::to_string(v.size()));
  }
  if (!all_finite(v)) throw Error(ErrorCode::NonFiniteInput, "apply input contains NaN or Inf");
  counters_->forward.fetch_add(1, std::memory_order_relaxed);
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, DenseBackend>) {
          kernels::dense_matvec({b.a.rows(), b.a.cols(), b.a.data()}, v, out);
        } else if constexpr (std::is_same_v<T, CsrBackend>) {
          kernels::csr_matvec(b.view(), v, out);
        } else if constexpr (std::is_same_v<T, CumSumBackend>) {
          kernels::serial::cumsum(v, out);
        } else {
          const auto& inner = b.inner;
          if (inner.rows() < inner.cols()) {
            // [A; 0]
            inner.apply(v, out.first(inner.rows()));
            std::fill(out.begin() + static_cast<std::ptrdiff_t>(inner.rows()), out.end(), 0.0);
          } else {
            // [A 0]
            inner.apply(v.first(inner.cols()), out);
          }
        }
      },
      backend_->impl);
}

Vector LinearOperator::apply(std::span<const double> v) const {
  Vector out(rows());
  apply(v, out);
  return out;
}

void LinearOperator::apply_adjoint(std::span<const double> w, std::span<double> out) const {
  if (!adjoint_) {
    throw Error(ErrorCode::AdjointUnavailable, "operator handle only supports forward application");
  }
  if (w.size() != rows() || out.size() != cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "apply_adjoint expects input length " + std::to_string(rows()) + ", got " + std::to_string(w.size()));
  }
  if (!all_finite(w)) throw Error(ErrorCode::NonFiniteInput, "apply_adjoint input contains NaN or Inf");
  counters_->adjoint.fetch_add(1, std::memory_order_relaxed);
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, DenseBackend>) {
          kernels::dense_matvec_transposed({b.a.rows(), b.a.cols(), b.a.data()}, w, out);
        } else if constexpr (std::is_same_v<T, CsrBackend>) {
          kernels::csr_matvec(b.transposed_view(), w, out);
        } else if constexpr (std::is_same_v<T, CumSumBackend>) {
          kernels::serial::reverse_cumsum(w, out);
        } else {
          const auto& inner = b.inner;
          if (inner.rows() < inner.cols()) {
            inner.apply_adjoint(w.first(inner.rows()), out);
          } else {
            inner.apply_adjoint(w, out.first(inner.cols()));
            std::fill(out.begin() + static_cast<std::ptrdiff_t>(inner.cols()), out.end(), 0.0);
          }
        }
      },
      backend_->impl);
}

Vector LinearOperator::apply_adjoint(std::span<const double> w) const {
  Vector out(cols());
  apply_adjoint(w, out);
  return out;
}

std::uint64_t LinearOperator::apply_count() const noexcept {
  return counters_->forward.load(std::memory_order_relaxed);
}

std::uint64_t LinearOperator::adjoint_count() const noexcept {
  return counters_->adjoint.load(std::memory_order_relaxed);
}

void LinearOperator::reset_counters() const noexcept {
  counters_->forward.store(0, std::memory_order_relaxed);
  counters_->adjoint.store(0, std::memory_order_relaxed);
}

const LinearOperator* LinearOperator::embedded_inner() const noexcept {
  if (const auto* e = std::get_if<EmbeddedBackend>(&backend_->impl)) return &e->inner;
  return nullptr;
}

const DenseMatrix* LinearOperator::dense_storage() const noexcept {
  if (const auto* d = std::get_if<DenseBackend>(&backend_->impl)) return &d->a;
  return nullptr;
}

const CsrMatrix* LinearOperator::csr_storage() const noexcept {
  if (const auto* c = std::get_if<CsrBackend>(&backend_->impl)) return &c->a;
  return nullptr;
}

// ---------------------------------------------------------------- free functions

DenseMatrix materialize(const LinearOperator& op) {
  if (op.backend() == BackendKind::SquareEmbedded) {
    throw Error(ErrorCode::InvalidArgument, "square embeddings are never materialized");
  }
  if (const auto* d = op.dense_storage()) return *d;
  DenseMatrix out(op.rows(), op.cols());
  Vector e(op.cols(), 0.0);
  Vector col(op.rows());
  for (std::size_t j = 0; j < op.cols(); ++j) {
    e[j] = 1.0;
    op.apply(e, col);
    out.set_column(j, col);
    e[j] = 0.0;
  }
  return out;
}

Vector column_norms(const LinearOperator& op) {
  Vector norms(op.cols());
  Vector e(op.cols(), 0.0);
  Vector col(op.rows());
  for (std::size_t j = 0; j < op.cols(); ++j) {
    e[j] = 1.0;
    op.apply(e, col);
    norms[j] = norm2(col);
    e[j] = 0.0;
  }
  return norms;
}

double estimate_operator_norm(const LinearOperator& op, RngState& rng, std::size_t n_samples) {
  if (n_samples == 0) throw Error(ErrorCode::InvalidArgument, "n_samples must be positive");
  Vector x(op.cols());
  Vector ax(op.rows());
  double best = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    double xnorm = 0.0;
    do {
      for (auto& xi : x) xi = rng.normal();
      xnorm = norm2(x);
    } while (xnorm == 0.0);
    op.apply(x, ax);
    best = std::max(best, norm2(ax) / xnorm);
  }
  return best;
}

// ---------------------------------------------------------------- problems

double Problem::noise_norm() const { return noise ? norm2(noise->r) : 0.0; }

void Problem::validate() const {
  if (rhs.size() != op.rows()) throw Error(ErrorCode::DimensionMismatch, "rhs length must equal m");
  if (ground_truth && ground_truth->size() != op.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "ground truth length must equal d");
  }
  if (noise && noise->r.size() != op.rows()) throw Error(ErrorCode::DimensionMismatch, "noise length must equal m");
}

Problem embed_square(const Problem& p) {
  const auto m = p.op.rows();
  const auto d = p.op.cols();
  if (m == d) return p;
  Problem out{LinearOperator::square_embedding(p.op), p.rhs, p.ground_truth, p.noise};
  if (m < d) {
    out.rhs.resize(d, 0.0);
    if (out.noise) {
      out.noise->r.resize(d, 0.0);
      if (out.noise->r_range) out.noise->r_range->resize(d, 0.0);
      if (out.noise->r_perp) out.noise->r_perp->resize(d, 0.0);
    }
  } else if (out.ground_truth) {
    out.ground_truth->resize(m, 0.0);
  }
  return out;
}

Vector restrict_solution(const LinearOperator& op, std::span<const double> v) {
  const auto* inner = op.embedded_inner();
  if (inner != nullptr && inner->cols() < v.size()) return Vector(v.begin(), v.begin() + inner->cols());
  return Vector(v.begin(), v.end());
}

}  // namespace adjfree
