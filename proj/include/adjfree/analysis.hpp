#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adjfree/dense.hpp"
#include "adjfree/operator.hpp"
#include "adjfree/rng.hpp"
#include "adjfree/sampling.hpp"

namespace adjfree {

// ------------------------------------------------------------ SVD

/// Thin SVD A = W·diag(σ)·Uᵀ restricted to the numerical rank r.
struct SpectralData {
  std::size_t rows = 0;  // m
  std::size_t cols = 0;  // d
  Vector singular_values;  // σ₁ ≥ … ≥ σ_r > 0
  DenseMatrix right;       // U, d×r
  DenseMatrix left;        // W, m×r
  std::size_t rank = 0;

  double sigma_max() const { return singular_values.empty() ? 0.0 : singular_values.front(); }
  /// Smallest positive singular value.
  double sigma_min() const { return singular_values.empty() ? 0.0 : singular_values.back(); }
  bool full_column_rank() const { return rank == cols; }
  Vector u(std::size_t i) const { return right.column(i); }
  Vector w(std::size_t i) const { return left.column(i); }
};

inline constexpr std::size_t kMaxSvdDimension = 2000;

/// One-sided Jacobi (Hestenes) SVD with cyclic sweeps. Singular values below
/// 1e-12·σ₁ are dropped from the rank. Throws TooLarge beyond 2000 rows or
/// columns.
SpectralData svd_small_dense(const DenseMatrix& a);

struct SymmetricEigen {
  Vector values;         // descending
  DenseMatrix vectors;  // matching columns
};
/// Cyclic Jacobi eigen-decomposition of a symmetric matrix (upper triangle
/// is read).
SymmetricEigen symmetric_eigen(const DenseMatrix& s);

// ------------------------------------------------------------ M = E[xxᵀ/‖Ax‖²]

struct MEstimate {
  DenseMatrix matrix;
  std::size_t n_samples = 0;
  std::size_t n_null_directions = 0;
  bool diverged = false;
  /// max/median over the 10 block means of ‖x‖²/‖Ax‖².
  double block_ratio = 0.0;
  /// Largest single ‖x‖²/‖Ax‖² as a share of their sum.
  double max_share = 0.0;
};

inline constexpr std::size_t kEstimateBlockSize = 8192;
/// diverged is set when block_ratio exceeds kDivergenceRatio, or when one draw
/// carries more than kDominanceShare of the total over at least
/// kDominanceMinDraws kept draws. Both are symptoms of an infinite mean.
inline constexpr double kDivergenceRatio = 100.0;
inline constexpr double kDominanceShare = 0.25;
inline constexpr std::size_t kDominanceMinDraws = 1000;

/// Monte-Carlo estimate of M. Draws are split into fixed blocks, each with its
/// own substream, and reduced in block order, so the result does not depend on
/// the OpenMP thread count. Throws AllDirectionsNull when no draw survives the
/// null threshold.
MEstimate estimate_M(const LinearOperator& op, const SamplerSpec& spec, RngState& rng, std::size_t n);

/// (1/d)·diag(‖a_j‖⁻²). Throws ZeroColumn.
DenseMatrix coordinate_M_exact(std::span<const double> col_norms);
/// diag(p_j‖a_j‖⁻²) for weighted coordinate sampling (unscaled by d since the
/// draws are √d·e_k; the factor d cancels). Zero-weight columns contribute 0.
DenseMatrix weighted_coordinate_M_exact(std::span<const double> col_norms, std::span<const double> weights);

// ------------------------------------------------------------ rates

struct OptimalStep {
  double tau;
  double lambda;
};

/// τ_opt = (2/c)/(λmax + λmin), λ_opt = 1 − (4/c)κ/(κ+1)². Throws
/// DegenerateSpectrum when λmin ≤ 0.
OptimalStep sgdas_optimal_stepsize(double lambda_max, double lambda_min, double c);

/// Θ_τ(μ) = 1 − τμ(2 − τcμ)
double theta_factor(double tau, double c, double mu);

/// ρ(I − τAᵀA(2I − τcAᵀA)); eigenvalue 0 is included when rank < d.
double sgdas_contraction(const SpectralData& spectral, double tau, double c);

struct RateReport {
  double c = 0.0;
  double tau = 0.0;
  double sigma_max = 0.0;
  double sigma_min = 0.0;  // smallest positive
  double lambda_max = 0.0;  // of AᵀA
  double lambda_min = 0.0;  // of AᵀA, 0 when rank-deficient
  double frobenius_squared = 0.0;
  std::optional<double> kappa;
  std::optional<double> tau_opt;
  std::optional<double> lambda_opt;
  std::optional<double> lambda;  // SGDAS error contraction at τ, when < 1
  std::optional<double> beta;    // SGDAS residual contraction at τ, when 0 < τ < 2/(c‖A‖²)
  std::optional<double> m_min_eig;
  std::optional<double> rd_bound;        // 1 − λmin(M)σmin²
  std::optional<double> rd_bound_range;  // 1 − λmin(AMAᵀ)
  std::optional<double> bracket_lower;   // 1/(dσmax²), m ≥ d and full column rank
  std::optional<double> bracket_upper;   // 1/(dσmin²)
  std::vector<std::string> notes;
};

/// Closed-form constants. Fields whose preconditions fail stay empty and a
/// note says why. m_range_min_eig is λmin(AMAᵀ) when known.
RateReport rate_bounds(const SpectralData& spectral, std::optional<double> m_min_eig, double c, double tau,
                       std::optional<double> m_range_min_eig = std::nullopt);

struct NormalBounds {
  double lower;
  double upper;
  double approx_lower;
  double approx_upper;
};

/// Bounds on the eigenvalues of M for Gaussian or sphere sampling, with
/// λ_i = σ_i². Throws DimensionTooSmall for d ≤ 2 and NonPositiveArgument for
/// σ_i ≤ 0.
NormalBounds normal_M_eigen_bounds(std::span<const double> singular_values, std::size_t d);

/// Lanczos approximation, g = 7, 9 coefficients. Throws NonPositiveArgument.
double gamma_function(double z);
double log_gamma(double z);

// ------------------------------------------------------------ singular vectors

/// ⟨v − v̂, u_i⟩ for i < r.
Vector singular_coefficients(std::span<const double> v, std::span<const double> v_hat, const SpectralData& spectral);
/// ⟨r, w_i⟩ for i < r.
Vector noise_coefficients(std::span<const double> r, const SpectralData& spectral);

/// (1 − f)ᵏ·initial + (1 − (1 − f)ᵏ)/σ·noise with f = ωσ² or μσ².
double predict_coefficient(std::size_t k, double initial_coeff, double noise_coeff, double sigma, double rate_factor);

/// μ̂_i = u_iᵀ M̂ u_i for i < r.
Vector projected_mu(const DenseMatrix& m_hat, const SpectralData& spectral);

/// τ²·2((1−λ)c + 2‖I − τcAᵀA‖²)/(1−λ)²·‖Aᵀr′‖². Throws RateDegenerate for
/// λ ≥ 1.
double inconsistent_offset_bound(double tau, double c, double lambda, const SpectralData& spectral,
                                 double range_noise_norm);

struct NoiseSplit {
  Vector r_range;
  Vector r_perp;
};
NoiseSplit split_noise(const DenseMatrix& a, std::span<const double> r);
NoiseSplit split_noise(const SpectralData& spectral, std::span<const double> r);

}  // namespace adjfree
