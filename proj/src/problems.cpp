#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "adjfree/errors.hpp"
#include "adjfree/io.hpp"
#include "adjfree/kernels.hpp"

namespace adjfree {
namespace {

// Fixed substream ids so that each random ingredient is independent of the
// sizes of the others.
enum Stream : std::uint64_t {
  kPositions = 1,
  kValues = 2,
  kSolution = 3,
  kNoise = 4,
  kRough = 5,
  kIntegrationNoise = 6,
};

// Floyd's algorithm: k distinct integers from [0, n), returned sorted.
std::vector<std::uint64_t> sample_positions(std::uint64_t n, std::uint64_t k, RngState& rng) {
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(static_cast<std::size_t>(k) * 2);
  for (std::uint64_t j = n - k; j < n; ++j) {
    const std::uint64_t t = rng.uniform_index(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> out(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

void ProblemGenSpec::validate() const {
  if (m == 0 || d == 0) throw Error(ErrorCode::InvalidArgument, "m and d must be positive");
  if (!(density > 0.0 && density <= 1.0)) throw Error(ErrorCode::InvalidArgument, "density must lie in (0, 1]");
  if (nnz() < 1) throw Error(ErrorCode::InvalidArgument, "density too small: no nonzeros");
  if (noise_level && !(*noise_level >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise level must be >= 0");
}

std::size_t ProblemGenSpec::nnz() const {
  return static_cast<std::size_t>(std::llround(density * static_cast<double>(m) * static_cast<double>(d)));
}

Problem generate_problem(const ProblemGenSpec& spec, Capability cap) {
  spec.validate();
  const std::uint64_t total = static_cast<std::uint64_t>(spec.m) * spec.d;
  RngState pos_rng(spec.seed, kPositions);
  const auto positions = sample_positions(total, spec.nnz(), pos_rng);

  RngState val_rng(spec.seed, kValues);
  CsrMatrix a;
  a.rows = spec.m;
  a.cols = spec.d;
  a.row_ptr.assign(spec.m + 1, 0);
  a.col_idx.reserve(positions.size());
  a.values.reserve(positions.size());
  for (const std::uint64_t p : positions) {
    const std::size_t i = p / spec.d;
    a.col_idx.push_back(static_cast<std::int32_t>(p % spec.d));
    a.values.push_back(val_rng.normal());
    ++a.row_ptr[i + 1];
  }
  for (std::size_t i = 0; i < spec.m; ++i) a.row_ptr[i + 1] += a.row_ptr[i];

  RngState sol_rng(spec.seed, kSolution);
  Vector v_hat(spec.d);
  for (auto& x : v_hat) x = sol_rng.normal();

  const bool small = total <= kNoiseSplitMaxEntries;
  const DenseMatrix dense = small && spec.noise_level ? a.to_dense() : DenseMatrix();
  Problem p{LinearOperator::csr(std::move(a), cap), {}, std::move(v_hat), std::nullopt};
  p.rhs = p.op.apply(*p.ground_truth);

  if (spec.noise_level) {
    RngState noise_rng(spec.seed, kNoise);
    const double scale = *spec.noise_level * norm2(p.rhs) / std::sqrt(static_cast<double>(spec.m));
    NoiseRecord noise;
    noise.r.resize(spec.m);
    for (auto& x : noise.r) x = scale * noise_rng.normal();
    if (small) {
      NoiseSplit split = split_noise(dense, noise.r);
      noise.range_noise_norm = norm2(multiply_transposed(dense, split.r_range));
      noise.r_range = std::move(split.r_range);
      noise.r_perp = std::move(split.r_perp);
    }
    axpy(1.0, noise.r, p.rhs);
    p.noise = std::move(noise);
  }
  p.op.reset_counters();
  return p;
}

Vector rough_solution(std::size_t d, std::uint64_t seed) {
  RngState rng(seed, kRough);
  Vector v(d);
  double sign = rng.sign();
  for (std::size_t i = 0; i < d; ++i) {
    if (i > 0 && rng.uniform() < 0.75) sign = -sign;
    v[i] = sign * (1.0 + 0.2 * rng.normal());
  }
  return v;
}

Problem make_inverse_integration_problem(std::size_t d, const InverseIntegrationSolution& solution, double noise_level,
                                         std::uint64_t seed, Capability cap) {
  if (d < 2) throw Error(ErrorCode::InvalidArgument, "inverse integration needs d >= 2");
  if (!(noise_level >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise level must be >= 0");
  Vector v_hat;
  if (const auto* rough = std::get_if<RoughSolution>(&solution)) {
    v_hat = rough_solution(d, rough->seed);
  } else {
    v_hat = std::get<Vector>(solution);
    if (v_hat.size() != d) throw Error(ErrorCode::DimensionMismatch, "provided solution must have length d");
  }
  Problem p{LinearOperator::cumsum(d, cap), {}, std::move(v_hat), std::nullopt};
  p.rhs = p.op.apply(*p.ground_truth);

  NoiseRecord noise;
  noise.r.assign(d, 0.0);
  if (noise_level > 0.0) {
    RngState rng(seed, kIntegrationNoise);
    for (auto& x : noise.r) x = rng.normal();
    const double scale = noise_level * norm2(p.rhs) / norm2(noise.r);
    for (auto& x : noise.r) x *= scale;
  }
  // The running sum is invertible, so every perturbation lies in its range.
  noise.r_range = noise.r;
  noise.r_perp = Vector(d, 0.0);
  Vector at_r(d);
  kernels::serial::reverse_cumsum(noise.r, at_r);
  noise.range_noise_norm = norm2(at_r);
  axpy(1.0, noise.r, p.rhs);
  p.noise = std::move(noise);
  p.op.reset_counters();
  return p;
}

}  // namespace adjfree
