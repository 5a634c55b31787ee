#pragma once

#include <chrono>

#include "adjfree/errors.hpp"
#include "adjfree/solvers.hpp"

namespace adjfree::detail {

/// Shared bookkeeping for every solver: stopping checks, strided records,
/// application counts and timing.
class TraceRecorder {
 public:
  TraceRecorder(Method method, const Problem& p, const SolveOptions& opts)
      : problem_(p), start_(std::chrono::steady_clock::now()) {
    opts.stopping.validate();
    if (opts.record_stride == 0) throw Error(ErrorCode::InvalidArgument, "record_stride must be >= 1");
    trace_.method = method;
    trace_.options = opts;
    trace_.rhs_norm = norm2(p.rhs);
    forward_start_ = p.op.apply_count();
    adjoint_start_ = p.op.adjoint_count();
  }

  double rhs_norm() const { return trace_.rhs_norm; }
  SolverTrace& trace() { return trace_; }

  /// Registers the state after iteration k. residual is Av − b (or its
  /// negative). Returns true when a stopping criterion fires.
  bool observe(std::size_t k, double residual_norm, double stepsize, std::span<const double> v,
               std::span<const double> residual) {
    IterationRecord rec = base_record(k, residual_norm, stepsize);
    const auto hit = first_satisfied(rec, trace_.rhs_norm, trace_.options.stopping);
    if (hit || k % trace_.options.record_stride == 0) push(std::move(rec), v, residual);
    if (hit) {
      const auto& criterion = trace_.options.stopping.any_of[*hit];
      trace_.termination = std::holds_alternative<MaxIter>(criterion) ? Termination::MaxIterReached
                                                                      : Termination::Converged;
      trace_.detail = describe(criterion);
      trace_.iterations = k;
      return true;
    }
    return false;
  }

  void breakdown(std::size_t k, double residual_norm, std::span<const double> v, std::span<const double> residual,
                 std::string reason) {
    if (trace_.records.empty() || trace_.records.back().k != k) {
      push(base_record(k, residual_norm, 0.0), v, residual);
    }
    trace_.termination = Termination::Breakdown;
    trace_.detail = std::move(reason);
    trace_.iterations = k;
  }

  /// Terminates as Converged without a matching criterion (exact zero
  /// residual, where Krylov recurrences would otherwise divide by zero).
  void exact(std::size_t k, double residual_norm, std::span<const double> v, std::span<const double> residual) {
    if (trace_.records.empty() || trace_.records.back().k != k) {
      push(base_record(k, residual_norm, 0.0), v, residual);
    }
    trace_.termination = Termination::Converged;
    trace_.detail = "exact solution";
    trace_.iterations = k;
  }

  SolverTrace finish(Vector v) {
    trace_.final_iterate = std::move(v);
    trace_.total_applies = problem_.op.apply_count() - forward_start_;
    trace_.adjoint_applies = problem_.op.adjoint_count() - adjoint_start_;
    trace_.wall_ns = elapsed_ns();
    return std::move(trace_);
  }

 private:
  IterationRecord base_record(std::size_t k, double residual_norm, double stepsize) const {
    IterationRecord rec;
    rec.k = k;
    rec.residual_norm = residual_norm;
    rec.stepsize = stepsize;
    rec.apply_count = problem_.op.apply_count() - forward_start_;
    return rec;
  }

  void push(IterationRecord rec, std::span<const double> v, std::span<const double> residual) {
    rec.wall_ns = elapsed_ns();
    if (problem_.ground_truth && all_finite(v)) {
      rec.error_norm = norm2(subtract(v, *problem_.ground_truth));
    }
    if (trace_.options.track_ls_residual && problem_.op.adjoint_available() && all_finite(residual)) {
      rec.ls_residual_norm = norm2(problem_.op.apply_adjoint(residual));
    }
    trace_.records.push_back(std::move(rec));
  }

  std::uint64_t elapsed_ns() const {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start_).count());
  }

  const Problem& problem_;
  SolverTrace trace_;
  std::chrono::steady_clock::time_point start_;
  std::uint64_t forward_start_ = 0;
  std::uint64_t adjoint_start_ = 0;
};

}  // namespace adjfree::detail
