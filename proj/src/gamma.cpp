#include <array>
#include <cmath>
#include <numbers>

#include "adjfree/analysis.hpp"
#include "adjfree/errors.hpp"

namespace adjfree {
namespace {

// Lanczos coefficients for g = 7, n = 9.
constexpr double kG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7,
};

// Series A_g(z) for Γ(z + 1) = √(2π)·t^(z+½)·e^(−t)·A_g(z), t = z + g + ½.
double lanczos_series(double z) {
  double x = kLanczos[0];
  for (std::size_t i = 1; i < kLanczos.size(); ++i) x += kLanczos[i] / (z + static_cast<double>(i));
  return x;
}

void require_positive(double z) {
  if (!(z > 0.0) || !std::isfinite(z)) throw Error(ErrorCode::NonPositiveArgument, "Gamma needs z > 0");
}

}  // namespace

double log_gamma(double z) {
  require_positive(z);
  if (z < 0.5) {
    // reflection; sin(πz) > 0 on (0, ½)
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * z)) - log_gamma(1.0 - z);
  }
  const double zm = z - 1.0;
  const double t = zm + kG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (zm + 0.5) * std::log(t) - t + std::log(lanczos_series(zm));
}

double gamma_function(double z) {
  require_positive(z);
  if (z < 0.5) return std::numbers::pi / (std::sin(std::numbers::pi * z) * gamma_function(1.0 - z));
  if (z > 140.0) return std::exp(log_gamma(z));
  const double zm = z - 1.0;
  const double t = zm + kG + 0.5;
  return std::sqrt(2.0 * std::numbers::pi) * std::pow(t, zm + 0.5) * std::exp(-t) * lanczos_series(zm);
}

NormalBounds normal_M_eigen_bounds(std::span<const double> singular_values, std::size_t d) {
  if (d <= 2) throw Error(ErrorCode::DimensionTooSmall, "Gaussian bounds need d > 2");
  if (singular_values.size() != d) throw Error(ErrorCode::DimensionMismatch, "need d singular values");
  double sum = 0.0;
  double log_prod = 0.0;
  for (double s : singular_values) {
    if (!(s > 0.0)) throw Error(ErrorCode::NonPositiveArgument, "singular values must be positive");
    sum += s * s;
    log_prod += 2.0 * std::log(s);
  }
  const auto dd = static_cast<double>(d);
  const double log_geo = log_prod / dd;  // log (λ₁⋯λ_d)^{1/d}
  NormalBounds out{};
  out.lower = std::exp(log_gamma(dd / 2.0) - log_gamma((dd + 1.0) / 2.0)) / (2.0 * sum);
  out.upper = std::exp(log_gamma(1.5 - 1.0 / dd) + (dd - 1.0) * log_gamma(0.5 - 1.0 / dd) - std::log(dd) - log_geo -
                       0.5 * dd * std::log(std::numbers::pi));
  out.approx_lower = 1.0 / (2.0 * std::sqrt(2.0 * dd) * sum);
  out.approx_upper = 1.0 / (2.0 * dd * std::exp(log_geo));
  return out;
}

}  // namespace adjfree
