// Randomized adjoint-free solvers (SGDAS and random descent) and the
// Landweber baseline.

#include <algorithm>
#include <cmath>

#include "adjfree/errors.hpp"
#include "adjfree/solvers.hpp"
#include "trace_recorder.hpp"

namespace adjfree {

Vector sgdas_gradient_sample(std::span<const double> residual, std::span<const double> ax,
                             std::span<const double> x) {
  if (residual.size() != ax.size()) throw Error(ErrorCode::DimensionMismatch, "residual and Ax differ in length");
  const double coeff = dot(residual, ax);
  Vector g(x.begin(), x.end());
  for (auto& gi : g) gi *= coeff;
  return g;
}

Vector sgdas_gradient_sample(const LinearOperator& op, std::span<const double> residual,
                             std::span<const double> x) {
  if (x.size() != op.cols()) throw Error(ErrorCode::DimensionMismatch, "direction length must equal d");
  const Vector ax = op.apply(x);
  return sgdas_gradient_sample(residual, ax, x);
}

double exact_stepsize(std::span<const double> residual, std::span<const double> ax, double x_squared_norm) {
  if (residual.size() != ax.size()) throw Error(ErrorCode::DimensionMismatch, "residual and Ax differ in length");
  const double axx = squared_norm(ax);
  if (!(axx >= kNullDirectionThreshold * x_squared_norm) || axx == 0.0) return 0.0;
  return -dot(residual, ax) / axx;
}

double resolve_sgdas_stepsize(const LinearOperator& op, const StepsizePolicy& policy, double c, RngState& rng) {
  return std::visit(
      [&](const auto& pol) -> double {
        using T = std::decay_t<decltype(pol)>;
        if constexpr (std::is_same_v<T, FixedStep>) {
          if (!(pol.tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "fixed stepsize must be positive");
          return pol.tau;
        } else if constexpr (std::is_same_v<T, OptimalSpectralStep>) {
          if (!(pol.lambda_min > 0.0) || pol.lambda_max < pol.lambda_min) {
            throw Error(ErrorCode::StepsizeUnresolvable, "optimal stepsize needs 0 < lambda_min <= lambda_max");
          }
          return (2.0 / c) / (pol.lambda_max + pol.lambda_min);
        } else {
          const double estimate = estimate_operator_norm(op, rng, pol.samples);
          if (!(estimate > 0.0)) throw Error(ErrorCode::StepsizeUnresolvable, "operator norm estimate is zero");
          const double surrogate = pol.safety * estimate;
          return 1.0 / (c * surrogate * surrogate);
        }
      },
      policy);
}

double resolve_landweber_stepsize(const LinearOperator& op, const StepsizePolicy& policy, RngState& rng) {
  return std::visit(
      [&](const auto& pol) -> double {
        using T = std::decay_t<decltype(pol)>;
        if constexpr (std::is_same_v<T, FixedStep>) {
          if (!(pol.tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "fixed stepsize must be positive");
          return pol.tau;
        } else if constexpr (std::is_same_v<T, OptimalSpectralStep>) {
          if (!(pol.lambda_max > 0.0)) throw Error(ErrorCode::StepsizeUnresolvable, "lambda_max must be positive");
          return 1.0 / pol.lambda_max;
        } else {
          // Landweber has Aᵀ anyway, so power iteration on AᵀA replaces the
          // probe maximum, which is far too low for wide operators.
          Vector x(op.cols());
          for (auto& xi : x) xi = rng.normal();
          Vector ax(op.rows());
          double estimate = 0.0;
          for (std::size_t it = 0; it < pol.samples; ++it) {
            const double xn = norm2(x);
            if (!(xn > 0.0)) break;
            for (auto& xi : x) xi /= xn;
            op.apply(x, ax);
            estimate = std::max(estimate, norm2(ax));
            op.apply_adjoint(ax, x);
          }
          if (!(estimate > 0.0)) throw Error(ErrorCode::StepsizeUnresolvable, "operator norm estimate is zero");
          const double surrogate = pol.safety * estimate;
          return 1.0 / (surrogate * surrogate);
        }
      },
      policy);
}

namespace {

enum class DirectionRule { Sgdas, ExactLinesearch };

// One forward application per iteration: Ax for the sampled x. The residual
// Av − b is updated alongside v and recomputed every refresh_every steps.
SolverTrace run_random_directions(Method method, DirectionRule rule, const Problem& p, const SolveOptions& opts) {
  p.validate();
  if (!opts.sampler) throw Error(ErrorCode::InvalidArgument, "randomized solvers need a sampler");
  const SamplerSpec& sampler = *opts.sampler;
  if (sampler.dimension() != p.op.cols()) throw Error(ErrorCode::DimensionMismatch, "sampler dimension must equal d");
  if (opts.residual_refresh_every == 0) throw Error(ErrorCode::InvalidArgument, "residual_refresh_every must be >= 1");

  detail::TraceRecorder recorder(method, p, opts);
  RngState rng(opts.seed, opts.stream);

  double tau = 0.0;
  if (rule == DirectionRule::Sgdas) {
    if (!sampler.isotropic() || sampler.kind() == SamplerKind::WeightedCoordinate) {
      throw Error(ErrorCode::NotIsotropic, "SGDAS requires an isotropic sampler");
    }
    // Stepsize estimation draws from its own substream so that the direction
    // sequence does not depend on the policy.
    RngState norm_rng = rng.substream(0x5eed);
    tau = resolve_sgdas_stepsize(p.op, opts.stepsize, c_constant(sampler), norm_rng);
    recorder.trace().stepsize = tau;
    recorder.trace().options.stepsize = FixedStep{tau};
  }

  const std::size_t m = p.op.rows();
  const std::size_t d = p.op.cols();
  Vector v(d, 0.0);
  Vector residual(m);
  for (std::size_t i = 0; i < m; ++i) residual[i] = -p.rhs[i];
  Vector x(d);
  Vector ax(m);
  Vector recomputed(m);

  std::size_t k = 0;
  if (recorder.observe(k, norm2(residual), 0.0, v, residual)) return recorder.finish(std::move(v));

  while (true) {
    sample_into(sampler, rng, x);
    p.op.apply(x, ax);
    double step = 0.0;
    if (rule == DirectionRule::Sgdas) {
      const double coeff = dot(residual, ax);
      step = tau;
      axpy(-tau * coeff, x, v);
      axpy(-tau * coeff, ax, residual);
    } else {
      const double xx = squared_norm(x);
      step = exact_stepsize(residual, ax, xx);
      if (squared_norm(ax) < kNullDirectionThreshold * xx) ++recorder.trace().null_steps;
      if (step != 0.0) {
        axpy(step, x, v);
        axpy(step, ax, residual);
      }
    }
    ++k;

    if (k % opts.residual_refresh_every == 0) {
      p.op.apply(v, recomputed);
      for (std::size_t i = 0; i < m; ++i) recomputed[i] -= p.rhs[i];
      const double true_norm = norm2(recomputed);
      const double drift = norm2(subtract(recomputed, residual));
      auto& tr = recorder.trace();
      ++tr.refreshes;
      if (true_norm > 0.0) tr.max_refresh_drift = std::max(tr.max_refresh_drift, drift / true_norm);
      residual.swap(recomputed);
    }

    if (!all_finite(v)) {
      recorder.breakdown(k, norm2(residual), v, residual, "non-finite iterate");
      return recorder.finish(std::move(v));
    }
    if (recorder.observe(k, norm2(residual), step, v, residual)) return recorder.finish(std::move(v));
  }
}

}  // namespace

SolverTrace run_sgdas(const Problem& p, const SolveOptions& opts) {
  return run_random_directions(Method::Sgdas, DirectionRule::Sgdas, p, opts);
}

SolverTrace run_rd(const Problem& p, const SolveOptions& opts) {
  return run_random_directions(Method::RandomDescent, DirectionRule::ExactLinesearch, p, opts);
}

SolverTrace run_landweber(const Problem& p, const SolveOptions& opts) {
  p.validate();
  if (!p.op.adjoint_available()) {
    throw Error(ErrorCode::AdjointUnavailable, "Landweber iteration needs the adjoint");
  }
  detail::TraceRecorder recorder(Method::Landweber, p, opts);
  RngState rng(opts.seed, opts.stream);
  const double omega = resolve_landweber_stepsize(p.op, opts.stepsize, rng);
  recorder.trace().stepsize = omega;
  recorder.trace().options.stepsize = FixedStep{omega};

  const std::size_t m = p.op.rows();
  const std::size_t d = p.op.cols();
  Vector v(d, 0.0);
  Vector residual(m);
  for (std::size_t i = 0; i < m; ++i) residual[i] = -p.rhs[i];
  Vector grad(d);

  std::size_t k = 0;
  if (recorder.observe(k, norm2(residual), 0.0, v, residual)) return recorder.finish(std::move(v));
  while (true) {
    p.op.apply_adjoint(residual, grad);
    axpy(-omega, grad, v);
    ++k;
    if (!all_finite(v)) {
      recorder.breakdown(k, INFINITY, v, residual, "non-finite iterate");
      return recorder.finish(std::move(v));
    }
    p.op.apply(v, residual);
    for (std::size_t i = 0; i < m; ++i) residual[i] -= p.rhs[i];
    if (!all_finite(residual)) {
      recorder.breakdown(k, norm2(residual), v, residual, "non-finite residual");
      return recorder.finish(std::move(v));
    }
    if (recorder.observe(k, norm2(residual), omega, v, residual)) return recorder.finish(std::move(v));
  }
}

SolverTrace run_solver(Method method, const Problem& p, const SolveOptions& opts) {
  switch (method) {
    case Method::RandomDescent: return run_rd(p, opts);
    case Method::Sgdas: return run_sgdas(p, opts);
    case Method::Landweber: return run_landweber(p, opts);
    case Method::Tfqmr:
    case Method::Cgs: {
      const bool embed = p.op.rows() != p.op.cols();
      const Problem square = embed ? embed_square(p) : p;
      SolverTrace trace = method == Method::Tfqmr ? run_tfqmr(square, opts) : run_cgs(square, opts);
      if (embed) {
        trace.final_iterate = restrict_solution(square.op, trace.final_iterate);
        trace.embedded = true;
      }
      return trace;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown method");
}

}  // namespace adjfree
