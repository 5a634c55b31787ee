#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adjfree/dense.hpp"
#include "adjfree/rng.hpp"

namespace adjfree {

class LinearOperator;

enum class SamplerKind {
  Rademacher,          // entries ±1
  Coordinate,          // √d·e_k, k uniform
  WeightedCoordinate,  // √d·e_k, k drawn from a weight vector
  NormalStd,           // N(0, I_d)
  SphereSqrtD,         // uniform on the sphere of radius √d
};

/// Distribution of the random search direction.
class SamplerSpec {
 public:
  SamplerSpec(SamplerKind kind, std::size_t dimension);
  /// Weights are non-negative and sum to 1 within 1e-12. A zero weight
  /// excludes that coordinate (kernel columns under Kaczmarz weighting).
  static SamplerSpec weighted(std::vector<double> weights);

  SamplerKind kind() const noexcept { return kind_; }
  std::size_t dimension() const noexcept { return dimension_; }
  std::span<const double> weights() const noexcept { return weights_; }
  bool isotropic() const noexcept;

 private:
  SamplerKind kind_;
  std::size_t dimension_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;

  friend void sample_into(const SamplerSpec& spec, RngState& rng, std::span<double> x);
};

/// Fills x with one draw. x.size() must equal spec.dimension().
void sample_into(const SamplerSpec& spec, RngState& rng, std::span<double> x);
Vector sample(const SamplerSpec& spec, RngState& rng);

/// c with E(x xᵀ ‖x‖²) = c·I. Throws NotIsotropic for weighted coordinates.
double c_constant(const SamplerSpec& spec);

struct SecondMoments {
  DenseMatrix cov;     // (1/n) Σ x xᵀ
  DenseMatrix fourth;  // (1/n) Σ x xᵀ ‖x‖²
};

SecondMoments empirical_second_moments(const SamplerSpec& spec, RngState& rng, std::size_t n);

struct KaczmarzWeights {
  std::vector<double> weights;
  /// Set when at least one column had zero norm and was given weight 0.
  bool had_zero_columns = false;
};

/// p_k = ‖a_k‖² / ‖A‖_F², from forward applications only.
KaczmarzWeights kaczmarz_weights(const LinearOperator& op);

/// CLI tokens: rademacher | coordinate | weighted | normal | sphere.
std::optional<SamplerKind> parse_sampler(std::string_view token);
std::string sampler_token(SamplerKind kind);

}  // namespace adjfree
