#include "adjfree/analysis.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

#include "adjfree/errors.hpp"
#include "adjfree/kernels.hpp"
#include "adjfree/solvers.hpp"

namespace adjfree {

// ------------------------------------------------------------ M estimation

namespace {

constexpr std::size_t kDivergenceBlocks = 10;
// Cap on simultaneously live per-block accumulators, in doubles.
constexpr std::size_t kAccumulatorBudget = std::size_t{1} << 22;

struct BlockResult {
  std::vector<double> upper;  // d×d, upper triangle
  std::size_t null_count = 0;
};

}  // namespace

MEstimate estimate_M(const LinearOperator& op, const SamplerSpec& spec, RngState& rng, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "n must be positive");
  const std::size_t d = op.cols();
  const std::size_t m = op.rows();
  if (spec.dimension() != d) throw Error(ErrorCode::DimensionMismatch, "sampler dimension must equal d");

  const RngState base = rng.substream(rng.next_u64());
  RngState norm_rng = base.substream(~std::uint64_t{0});
  const double sigma1 = estimate_operator_norm(op, norm_rng, 16);
  const double null_scale = kNullDirectionThreshold * sigma1 * sigma1;

  const std::size_t n_blocks = (n + kEstimateBlockSize - 1) / kEstimateBlockSize;
  const std::size_t wave = std::clamp<std::size_t>(kAccumulatorBudget / std::max<std::size_t>(d * d, 1), 1, 64);
  std::vector<double> traces(n, -1.0);  // ‖x‖²/‖Ax‖² per draw, −1 for null draws
  std::vector<double> total(d * d, 0.0);
  std::size_t null_total = 0;

  for (std::size_t first = 0; first < n_blocks; first += wave) {
    const std::size_t last = std::min(n_blocks, first + wave);
    std::vector<BlockResult> results(last - first);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t b = first; b < last; ++b) {
      BlockResult& res = results[b - first];
      res.upper.assign(d * d, 0.0);
      RngState local = base.substream(b);
      Vector x(d);
      Vector ax(m);
      const std::size_t begin = b * kEstimateBlockSize;
      const std::size_t end = std::min(n, begin + kEstimateBlockSize);
      for (std::size_t s = begin; s < end; ++s) {
        sample_into(spec, local, x);
        op.apply(x, ax);
        const double axx = squared_norm(ax);
        const double xx = squared_norm(x);
        if (axx <= null_scale * xx || axx == 0.0) {
          ++res.null_count;
          continue;
        }
        traces[s] = xx / axx;
        kernels::serial::weighted_outer_upper(x, 1.0 / axx, res.upper);
      }
    }
    for (const auto& res : results) {
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += res.upper[i];
      null_total += res.null_count;
    }
  }

  MEstimate out;
  out.n_samples = n;
  out.n_null_directions = null_total;
  const std::size_t kept = n - null_total;
  if (kept == 0) throw Error(ErrorCode::AllDirectionsNull, "every sampled direction was in the numerical kernel");
  out.matrix = DenseMatrix(d, d);
  const double inv_kept = 1.0 / static_cast<double>(kept);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      const double value = total[i * d + j] * inv_kept;
      out.matrix(i, j) = value;
      out.matrix(j, i) = value;
    }
  }

  double trace_sum = 0.0;
  double trace_max = 0.0;
  for (const double t : traces) {
    if (t < 0.0) continue;
    trace_sum += t;
    trace_max = std::max(trace_max, t);
  }
  out.max_share = trace_sum > 0.0 ? trace_max / trace_sum : 0.0;
  if (kept >= kDominanceMinDraws && out.max_share > kDominanceShare) out.diverged = true;

  if (n >= kDivergenceBlocks) {
    std::vector<double> means;
    for (std::size_t blk = 0; blk < kDivergenceBlocks; ++blk) {
      const std::size_t begin = blk * n / kDivergenceBlocks;
      const std::size_t end = (blk + 1) * n / kDivergenceBlocks;
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t s = begin; s < end; ++s) {
        if (traces[s] >= 0.0) {
          sum += traces[s];
          ++count;
        }
      }
      if (count > 0) means.push_back(sum / static_cast<double>(count));
    }
    if (!means.empty()) {
      std::vector<double> sorted = means;
      std::sort(sorted.begin(), sorted.end());
      const std::size_t h = sorted.size() / 2;
      const double median = sorted.size() % 2 == 1 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
      out.block_ratio = median > 0.0 ? sorted.back() / median : 0.0;
      if (out.block_ratio > kDivergenceRatio) out.diverged = true;
    }
  }
  return out;
}

DenseMatrix coordinate_M_exact(std::span<const double> col_norms) {
  const std::size_t d = col_norms.size();
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "need at least one column");
  DenseMatrix out(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    if (!(col_norms[j] > 0.0)) throw Error(ErrorCode::ZeroColumn, "column " + std::to_string(j) + " is zero");
    out(j, j) = 1.0 / (static_cast<double>(d) * col_norms[j] * col_norms[j]);
  }
  return out;
}

DenseMatrix weighted_coordinate_M_exact(std::span<const double> col_norms, std::span<const double> weights) {
  const std::size_t d = col_norms.size();
  if (weights.size() != d) throw Error(ErrorCode::DimensionMismatch, "weights and column norms differ in length");
  DenseMatrix out(d, d);
  for (std::size_t j = 0; j < d; ++j) {
    if (weights[j] == 0.0) continue;
    if (!(col_norms[j] > 0.0)) throw Error(ErrorCode::ZeroColumn, "column " + std::to_string(j) + " is zero");
    out(j, j) = weights[j] / (col_norms[j] * col_norms[j]);
  }
  return out;
}

// ------------------------------------------------------------ rates

double theta_factor(double tau, double c, double mu) { return 1.0 - tau * mu * (2.0 - tau * c * mu); }

OptimalStep sgdas_optimal_stepsize(double lambda_max, double lambda_min, double c) {
  if (!(lambda_min > 0.0)) throw Error(ErrorCode::DegenerateSpectrum, "lambda_min must be positive");
  if (lambda_max < lambda_min) throw Error(ErrorCode::InvalidArgument, "lambda_max < lambda_min");
  if (!(c > 0.0)) throw Error(ErrorCode::InvalidArgument, "c must be positive");
  const double kappa = lambda_max / lambda_min;
  return {(2.0 / c) / (lambda_max + lambda_min), 1.0 - (4.0 / c) * kappa / ((kappa + 1.0) * (kappa + 1.0))};
}

double sgdas_contraction(const SpectralData& spectral, double tau, double c) {
  double rho = spectral.full_column_rank() ? 0.0 : 1.0;  // Θ_τ(0) = 1
  for (double s : spectral.singular_values) rho = std::max(rho, std::abs(theta_factor(tau, c, s * s)));
  return rho;
}

RateReport rate_bounds(const SpectralData& spectral, std::optional<double> m_min_eig, double c, double tau,
                       std::optional<double> m_range_min_eig) {
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
  RateReport r;
  r.c = c;
  r.tau = tau;
  r.sigma_max = spectral.sigma_max();
  r.sigma_min = spectral.sigma_min();
  r.lambda_max = r.sigma_max * r.sigma_max;
  const bool full = spectral.full_column_rank() && spectral.rank > 0;
  r.lambda_min = full ? r.sigma_min * r.sigma_min : 0.0;
  for (double s : spectral.singular_values) r.frobenius_squared += s * s;

  if (full) {
    r.kappa = r.lambda_max / r.lambda_min;
    const OptimalStep opt = sgdas_optimal_stepsize(r.lambda_max, r.lambda_min, c);
    r.tau_opt = opt.tau;
    r.lambda_opt = opt.lambda;
  } else {
    r.notes.emplace_back("A^T A is singular: no kappa, optimal stepsize or error contraction");
  }

  const double rho = sgdas_contraction(spectral, tau, c);
  if (rho < 1.0) {
    r.lambda = rho;
  } else if (full) {
    r.notes.emplace_back("tau gives spectral radius >= 1: error contraction not applicable");
  }

  if (spectral.rank > 0 && tau < 2.0 / (c * r.lambda_max)) {
    r.beta = 1.0 - tau * r.sigma_min * r.sigma_min * (2.0 - tau * c * r.lambda_max);
  } else {
    r.notes.emplace_back("tau outside (0, 2/(c||A||^2)): residual contraction not applicable");
  }

  if (m_min_eig) {
    r.m_min_eig = *m_min_eig;
    if (*m_min_eig > 0.0 && spectral.rank > 0) {
      r.rd_bound = 1.0 - *m_min_eig * r.sigma_min * r.sigma_min;
    } else {
      r.notes.emplace_back("lambda_min(M) <= 0: RD bound via sigma_min not applicable");
    }
  }
  if (m_range_min_eig) {
    if (*m_range_min_eig > 0.0 && spectral.rows <= spectral.cols) {
      r.rd_bound_range = 1.0 - *m_range_min_eig;
    } else {
      r.notes.emplace_back("lambda_min(A M A^T) <= 0: RD bound via A M A^T not applicable");
    }
  }
  if (!r.rd_bound && !r.rd_bound_range) r.notes.emplace_back("no linear RD residual bound applies");

  if (full && spectral.rows >= spectral.cols) {
    const auto d = static_cast<double>(spectral.cols);
    r.bracket_lower = 1.0 / (d * r.lambda_max);
    r.bracket_upper = 1.0 / (d * r.lambda_min);
  }
  return r;
}

// ------------------------------------------------------------ singular vectors

Vector singular_coefficients(std::span<const double> v, std::span<const double> v_hat, const SpectralData& spectral) {
  if (v.size() != spectral.cols || v_hat.size() != spectral.cols) {
    throw Error(ErrorCode::DimensionMismatch, "iterate length must equal d");
  }
  const Vector diff = subtract(v, v_hat);
  Vector out(spectral.rank, 0.0);
  for (std::size_t i = 0; i < spectral.cols; ++i) {
    for (std::size_t k = 0; k < spectral.rank; ++k) out[k] += spectral.right(i, k) * diff[i];
  }
  return out;
}

Vector noise_coefficients(std::span<const double> r, const SpectralData& spectral) {
  if (r.size() != spectral.rows) throw Error(ErrorCode::DimensionMismatch, "noise length must equal m");
  Vector out(spectral.rank, 0.0);
  for (std::size_t i = 0; i < spectral.rows; ++i) {
    for (std::size_t k = 0; k < spectral.rank; ++k) out[k] += spectral.left(i, k) * r[i];
  }
  return out;
}

double predict_coefficient(std::size_t k, double initial_coeff, double noise_coeff, double sigma, double rate_factor) {
  const double decay = std::pow(1.0 - rate_factor, static_cast<double>(k));
  return decay * initial_coeff + (1.0 - decay) / sigma * noise_coeff;
}

Vector projected_mu(const DenseMatrix& m_hat, const SpectralData& spectral) {
  if (m_hat.rows() != spectral.cols || m_hat.cols() != spectral.cols) {
    throw Error(ErrorCode::DimensionMismatch, "M must be d×d");
  }
  Vector out(spectral.rank);
  for (std::size_t k = 0; k < spectral.rank; ++k) {
    const Vector u = spectral.u(k);
    out[k] = dot(u, multiply(m_hat, u));
  }
  return out;
}

double inconsistent_offset_bound(double tau, double c, double lambda, const SpectralData& spectral,
                                 double range_noise_norm) {
  if (!(lambda < 1.0)) throw Error(ErrorCode::RateDegenerate, "offset is not meaningful for lambda >= 1");
  if (lambda < 0.0) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
  double op_norm = spectral.full_column_rank() ? 0.0 : 1.0;
  for (double s : spectral.singular_values) op_norm = std::max(op_norm, std::abs(1.0 - tau * c * s * s));
  const double gap = 1.0 - lambda;
  return tau * tau * 2.0 * (gap * c + 2.0 * op_norm * op_norm) / (gap * gap) * range_noise_norm * range_noise_norm;
}

NoiseSplit split_noise(const SpectralData& spectral, std::span<const double> r) {
  const Vector coeffs = noise_coefficients(r, spectral);
  NoiseSplit out{Vector(spectral.rows, 0.0), Vector(r.begin(), r.end())};
  for (std::size_t i = 0; i < spectral.rows; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < spectral.rank; ++k) acc += spectral.left(i, k) * coeffs[k];
    out.r_range[i] = acc;
    out.r_perp[i] -= acc;
  }
  return out;
}

NoiseSplit split_noise(const DenseMatrix& a, std::span<const double> r) {
  if (r.size() != a.rows()) throw Error(ErrorCode::DimensionMismatch, "noise length must equal m");
  return split_noise(svd_small_dense(a), r);
}

}  // namespace adjfree
