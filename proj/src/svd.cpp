#include <algorithm>
#include <cmath>
#include <numeric>

#include "adjfree/analysis.hpp"
#include "adjfree/errors.hpp"

namespace adjfree {
namespace {

constexpr double kSweepTolerance = 1e-14;
constexpr int kMaxSweeps = 60;
constexpr double kRankCutoff = 1e-12;

using Columns = std::vector<Vector>;

Columns to_columns(const DenseMatrix& a) {
  Columns cols(a.cols(), Vector(a.rows()));
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) cols[j][i] = a(i, j);
  }
  return cols;
}

void rotate(Vector& p, Vector& q, double c, double s) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double a = p[i];
    const double b = q[i];
    p[i] = c * a - s * b;
    q[i] = s * a + c * b;
  }
}

// Hestenes one-sided Jacobi on a tall (rows ≥ cols) matrix.
SpectralData jacobi_tall(const DenseMatrix& a) {
  const std::size_t m = a.rows();
  const std::size_t d = a.cols();
  Columns g = to_columns(a);
  Columns v(d, Vector(d, 0.0));
  for (std::size_t j = 0; j < d; ++j) v[j][j] = 1.0;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double alpha = squared_norm(g[p]);
        const double beta = squared_norm(g[q]);
        const double gamma = dot(g[p], g[q]);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= kSweepTolerance * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(g[p], g[q], c, s);
        rotate(v[p], v[q], c, s);
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(d);
  for (std::size_t j = 0; j < d; ++j) sigma[j] = norm2(g[j]);
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  SpectralData out;
  out.rows = m;
  out.cols = d;
  const double top = d > 0 ? sigma[order[0]] : 0.0;
  std::size_t rank = 0;
  while (rank < d && sigma[order[rank]] > kRankCutoff * top && sigma[order[rank]] > 0.0) ++rank;
  out.rank = rank;
  out.singular_values.resize(rank);
  out.right = DenseMatrix(d, rank);
  out.left = DenseMatrix(m, rank);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t j = order[k];
    out.singular_values[k] = sigma[j];
    for (std::size_t i = 0; i < d; ++i) out.right(i, k) = v[j][i];
    for (std::size_t i = 0; i < m; ++i) out.left(i, k) = g[j][i] / sigma[j];
  }
  return out;
}

}  // namespace

SpectralData svd_small_dense(const DenseMatrix& a) {
  if (a.rows() > kMaxSvdDimension || a.cols() > kMaxSvdDimension) {
    throw Error(ErrorCode::TooLarge, "dense SVD is limited to 2000 rows and columns");
  }
  if (a.rows() == 0 || a.cols() == 0) throw Error(ErrorCode::InvalidArgument, "empty matrix");
  if (!all_finite(a.data())) throw Error(ErrorCode::NonFiniteInput, "matrix has non-finite entries");
  if (a.rows() >= a.cols()) return jacobi_tall(a);
  // A = W Σ Uᵀ  ⇔  Aᵀ = U Σ Wᵀ
  SpectralData t = jacobi_tall(a.transposed());
  SpectralData out;
  out.rows = a.rows();
  out.cols = a.cols();
  out.rank = t.rank;
  out.singular_values = std::move(t.singular_values);
  out.right = std::move(t.left);
  out.left = std::move(t.right);
  return out;
}

SymmetricEigen symmetric_eigen(const DenseMatrix& s) {
  const std::size_t n = s.rows();
  if (s.cols() != n) throw Error(ErrorCode::NotSquare, "symmetric_eigen needs a square matrix");
  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = s(i, j);
  }
  DenseMatrix v = DenseMatrix::identity(n);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diag += a(i, i) * a(i, i);
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off <= kSweepTolerance * kSweepTolerance * diag || off == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymmetricEigen out{Vector(n), DenseMatrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

}  // namespace adjfree
