#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "adjfree/dense.hpp"
#include "adjfree/operator.hpp"
#include "adjfree/sampling.hpp"

namespace adjfree {

// ------------------------------------------------------------ stopping rules

struct MaxIter {
  std::size_t n;
};
struct RelResidual {
  double tol;  // stop once ‖Av − b‖/‖b‖ ≤ tol
};
/// Discrepancy principle: stop once ‖Av − b̃‖ ≤ factor·‖b − b̃‖.
struct Morozov {
  double factor;
  double noise_norm;
};
using StopCriterion = std::variant<MaxIter, RelResidual, Morozov>;

/// Disjunction of criteria, checked in listed order.
struct StoppingRule {
  std::vector<StopCriterion> any_of;

  StoppingRule() = default;
  StoppingRule(std::initializer_list<StopCriterion> criteria);
  void validate() const;
};

std::string describe(const StopCriterion& criterion);

struct IterationRecord {
  std::size_t k = 0;
  double residual_norm = 0.0;
  double stepsize = 0.0;
  std::optional<double> ls_residual_norm;  // ‖Aᵀ(Av − b)‖, diagnostic only
  std::optional<double> error_norm;        // ‖v − v̂‖
  std::uint64_t apply_count = 0;
  std::uint64_t wall_ns = 0;
};

/// Index of the first satisfied criterion, if any. rhs_norm = 0 satisfies a
/// relative-residual criterion immediately.
std::optional<std::size_t> first_satisfied(const IterationRecord& record, double rhs_norm,
                                           const StoppingRule& rule);
bool check_stop(const IterationRecord& record, double rhs_norm, const StoppingRule& rule);

// ------------------------------------------------------------ options

struct FixedStep {
  double tau;
};
/// SGDAS: τ = (2/c)/(λmax + λmin). Landweber: ω = 1/λmax.
struct OptimalSpectralStep {
  double lambda_max;
  double lambda_min;
};
/// τ = 1/(c·(safety·estimate)²) from a sampled lower bound on ‖A‖.
struct NormSurrogateStep {
  double safety = 1.5;
  std::size_t samples = 32;
};
using StepsizePolicy = std::variant<FixedStep, OptimalSpectralStep, NormSurrogateStep>;

struct SolveOptions {
  std::optional<SamplerSpec> sampler;  // required by RD and SGDAS
  StoppingRule stopping{MaxIter{10000}};
  StepsizePolicy stepsize = NormSurrogateStep{};
  std::size_t record_stride = 1;
  std::size_t residual_refresh_every = 1000;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  /// Record ‖Aᵀ(Av − b)‖ when the handle exposes an adjoint.
  bool track_ls_residual = false;
};

enum class Method { RandomDescent, Sgdas, Landweber, Tfqmr, Cgs };
enum class Termination { Converged, MaxIterReached, Breakdown };

std::optional<Method> parse_method(std::string_view token);
std::string method_token(Method method);
std::string termination_name(Termination termination);

struct SolverTrace {
  Method method = Method::RandomDescent;
  SolveOptions options;
  std::vector<IterationRecord> records;
  Vector final_iterate;
  Termination termination = Termination::MaxIterReached;
  std::string detail;  // satisfied criterion, or the breakdown reason
  std::size_t iterations = 0;
  std::uint64_t total_applies = 0;
  std::uint64_t adjoint_applies = 0;
  std::uint64_t wall_ns = 0;
  double rhs_norm = 0.0;
  double stepsize = 0.0;  // constant stepsize used by SGDAS / Landweber
  std::size_t null_steps = 0;  // RD steps with Ax numerically zero
  std::size_t refreshes = 0;
  double max_refresh_drift = 0.0;  // relative, incremental vs recomputed residual
  bool embedded = false;

  const IterationRecord& last() const { return records.back(); }
  double final_relative_residual() const;
};

// ------------------------------------------------------------ primitives

/// ⟨residual, Ax⟩·x: one sample of the gradient Aᵀ(Av − b).
Vector sgdas_gradient_sample(std::span<const double> residual, std::span<const double> ax,
                             std::span<const double> x);
/// Same, evaluating Ax through the operator (one application).
Vector sgdas_gradient_sample(const LinearOperator& op, std::span<const double> residual,
                             std::span<const double> x);

/// Minimizer over τ of ‖r + τ·Ax‖: −⟨r, Ax⟩/‖Ax‖², or 0 when
/// ‖Ax‖² < 1e-28·x_squared_norm.
double exact_stepsize(std::span<const double> residual, std::span<const double> ax,
                      double x_squared_norm = 1.0);

inline constexpr double kNullDirectionThreshold = 1e-28;

/// Constant SGDAS stepsize for the given policy and isotropy constant c.
double resolve_sgdas_stepsize(const LinearOperator& op, const StepsizePolicy& policy, double c,
                              RngState& rng);
double resolve_landweber_stepsize(const LinearOperator& op, const StepsizePolicy& policy, RngState& rng);

// ------------------------------------------------------------ solvers

SolverTrace run_sgdas(const Problem& p, const SolveOptions& opts);
SolverTrace run_rd(const Problem& p, const SolveOptions& opts);
SolverTrace run_landweber(const Problem& p, const SolveOptions& opts);
SolverTrace run_tfqmr(const Problem& p, const SolveOptions& opts);
SolverTrace run_cgs(const Problem& p, const SolveOptions& opts);

/// Dispatches on method. TFQMR and CGS on a rectangular problem are run on
/// the square embedding and the iterate is mapped back.
SolverTrace run_solver(Method method, const Problem& p, const SolveOptions& opts);

}  // namespace adjfree
