#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "adjfree/io.hpp"
#include "adjfree/operator.hpp"
#include "adjfree/solvers.hpp"

namespace adjfree::cli {

enum ExitCode : int {
  kExitConverged = 0,
  kExitMaxIter = 2,
  kExitBreakdown = 3,
  kExitUsage = 64,
  kExitFile = 74,
};

int exit_code_for(Termination t);

/// `gen:m=300,d=1200,density=0.1,seed=7[,noise=1e-3]`. seed defaults to
/// default_seed, density to 1. Throws InvalidArgument on malformed input.
ProblemGenSpec parse_gen_spec(std::string_view text, std::uint64_t default_seed);

/// `gen:...`, `cumsum:d=<n>` or a MatrixMarket path. File and cumsum
/// problems get a standard normal v̂ (seeded) and b = Av̂.
Problem load_problem(const std::string& matrix, std::uint64_t seed, Capability cap = Capability::WithAdjoint);

/// Sampler from its CLI token; `weighted` uses Kaczmarz weights from the
/// operator's column norms.
SamplerSpec make_sampler(std::string_view token, const LinearOperator& op);

// ------------------------------------------------------------ ill-posed study

/// Calibrated default noise level for the d = 100 inverse-integration study.
inline constexpr double kIllposedDefaultNoise = 5e-3;
inline constexpr std::uint64_t kIllposedDefaultSolutionSeed = 11;

struct IllposedConfig {
  std::size_t d = 100;
  double noise = kIllposedDefaultNoise;
  double morozov = 1.001;
  std::vector<std::string> methods{"landweber", "rd-normal", "rd-sphere", "rd-rademacher", "rd-coordinate"};
  std::size_t max_iter = 100000;
  std::size_t m_samples = 200000;
  std::uint64_t seed = 7;
  std::uint64_t solution_seed = kIllposedDefaultSolutionSeed;
  int threads = 0;  // 0: OpenMP default
};

struct IllposedMethodResult {
  std::string name;
  double best_rel_error = 0.0;
  std::size_t best_k = 0;
  std::optional<double> morozov_rel_error;
  std::optional<std::size_t> morozov_k;
  SolverTrace trace;
};

struct IllposedResult {
  Problem problem;
  SpectralData spectral;
  double small_sigma_energy_fraction = 0.0;
  double noise_norm = 0.0;
  /// σ_i²/‖A‖² per singular index.
  Vector landweber_factors;
  /// μ̂_iσ_i² per RD sampler token, in the order of the RD methods.
  std::vector<std::pair<std::string, Vector>> rd_factors;
  std::vector<IllposedMethodResult> methods;

  nlohmann::json to_json() const;
};

IllposedResult run_illposed(const IllposedConfig& cfg);

/// Fraction of the indices in the smallest-σ half where factors > baseline.
double fraction_above_in_small_half(const Vector& factors, const Vector& baseline);

/// Entry point shared by the executable and the CLI tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace adjfree::cli
