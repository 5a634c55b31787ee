#include "adjfree/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "adjfree/errors.hpp"
#include "adjfree/kernels.hpp"
#include "adjfree/operator.hpp"

namespace adjfree {

SamplerSpec::SamplerSpec(SamplerKind kind, std::size_t dimension) : kind_(kind), dimension_(dimension) {
  if (dimension == 0) throw Error(ErrorCode::InvalidArgument, "sampler dimension must be positive");
  if (kind == SamplerKind::WeightedCoordinate) {
    // Without explicit weights the weighted sampler is the uniform one.
    weights_.assign(dimension, 1.0 / static_cast<double>(dimension));
    cumulative_.resize(dimension);
    double acc = 0.0;
    for (std::size_t k = 0; k < dimension; ++k) cumulative_[k] = (acc += weights_[k]);
  }
}

SamplerSpec SamplerSpec::weighted(std::vector<double> weights) {
  if (weights.empty()) throw Error(ErrorCode::InvalidArgument, "weights must be non-empty");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::InvalidArgument, "weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorCode::InvalidArgument, "weights must sum to 1");
  SamplerSpec spec(SamplerKind::WeightedCoordinate, weights.size());
  spec.weights_ = std::move(weights);
  double acc = 0.0;
  for (std::size_t k = 0; k < spec.weights_.size(); ++k) spec.cumulative_[k] = (acc += spec.weights_[k]);
  return spec;
}

bool SamplerSpec::isotropic() const noexcept {
  if (kind_ != SamplerKind::WeightedCoordinate) return true;
  const double uniform = 1.0 / static_cast<double>(dimension_);
  return std::all_of(weights_.begin(), weights_.end(), [&](double w) { return std::abs(w - uniform) <= 1e-12; });
}

void sample_into(const SamplerSpec& spec, RngState& rng, std::span<double> x) {
  const std::size_t d = spec.dimension();
  if (x.size() != d) throw Error(ErrorCode::DimensionMismatch, "sample buffer length must equal d");
  const double root_d = std::sqrt(static_cast<double>(d));
  switch (spec.kind()) {
    case SamplerKind::Rademacher:
      for (auto& xi : x) xi = rng.sign();
      return;
    case SamplerKind::Coordinate: {
      std::fill(x.begin(), x.end(), 0.0);
      x[rng.uniform_index(d)] = root_d;
      return;
    }
    case SamplerKind::WeightedCoordinate: {
      std::fill(x.begin(), x.end(), 0.0);
      const double u = rng.uniform() * spec.cumulative_.back();
      auto it = std::upper_bound(spec.cumulative_.begin(), spec.cumulative_.end(), u);
      auto k = static_cast<std::size_t>(it - spec.cumulative_.begin());
      k = std::min(k, d - 1);
      x[k] = root_d;
      return;
    }
    case SamplerKind::NormalStd:
    case SamplerKind::SphereSqrtD: {
      double ss = 0.0;
      do {
        for (auto& xi : x) xi = rng.normal();
        ss = squared_norm(x);
      } while (ss == 0.0);
      if (spec.kind() == SamplerKind::SphereSqrtD) {
        const double scale = root_d / std::sqrt(ss);
        for (auto& xi : x) xi *= scale;
      }
      return;
    }
  }
}

Vector sample(const SamplerSpec& spec, RngState& rng) {
  Vector x(spec.dimension());
  sample_into(spec, rng, x);
  return x;
}

double c_constant(const SamplerSpec& spec) {
  const auto d = static_cast<double>(spec.dimension());
  switch (spec.kind()) {
    case SamplerKind::Rademacher:
    case SamplerKind::Coordinate:
    case SamplerKind::SphereSqrtD:
      return d;
    case SamplerKind::NormalStd:
      return d + 2.0;
    case SamplerKind::WeightedCoordinate:
      break;
  }
  throw Error(ErrorCode::NotIsotropic, "weighted coordinate sampling has no isotropy constant");
}

SecondMoments empirical_second_moments(const SamplerSpec& spec, RngState& rng, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "n must be positive");
  const std::size_t d = spec.dimension();
  SecondMoments out{DenseMatrix(d, d), DenseMatrix(d, d)};
  Vector x(d);
  for (std::size_t s = 0; s < n; ++s) {
    sample_into(spec, rng, x);
    const double ss = squared_norm(x);
    kernels::serial::weighted_outer_upper(x, 1.0, out.cov.data());
    kernels::serial::weighted_outer_upper(x, ss, out.fourth.data());
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (auto* m : {&out.cov, &out.fourth}) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = i; j < d; ++j) {
        (*m)(i, j) *= inv_n;
        (*m)(j, i) = (*m)(i, j);
      }
    }
  }
  return out;
}

KaczmarzWeights kaczmarz_weights(const LinearOperator& op) {
  const Vector norms = column_norms(op);
  KaczmarzWeights out;
  out.weights.resize(norms.size());
  double total = 0.0;
  for (std::size_t j = 0; j < norms.size(); ++j) {
    out.weights[j] = norms[j] * norms[j];
    total += out.weights[j];
    if (norms[j] == 0.0) out.had_zero_columns = true;
  }
  if (total == 0.0) throw Error(ErrorCode::ZeroColumn, "every column of the operator is zero");
  for (auto& w : out.weights) w /= total;
  return out;
}

std::optional<SamplerKind> parse_sampler(std::string_view token) {
  if (token == "rademacher") return SamplerKind::Rademacher;
  if (token == "coordinate") return SamplerKind::Coordinate;
  if (token == "weighted") return SamplerKind::WeightedCoordinate;
  if (token == "normal") return SamplerKind::NormalStd;
  if (token == "sphere") return SamplerKind::SphereSqrtD;
  return std::nullopt;
}

std::string sampler_token(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Rademacher: return "rademacher";
    case SamplerKind::Coordinate: return "coordinate";
    case SamplerKind::WeightedCoordinate: return "weighted";
    case SamplerKind::NormalStd: return "normal";
    case SamplerKind::SphereSqrtD: return "sphere";
  }
  return "unknown";
}

}  // namespace adjfree
