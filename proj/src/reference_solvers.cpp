// Transpose-free Krylov baselines for square systems. Both keep the true
// residual b − Av (one extra forward application per iteration) so that the
// recorded norms are comparable with the randomized solvers.

#include <cmath>
#include <limits>

#include "adjfree/errors.hpp"
#include "adjfree/solvers.hpp"
#include "trace_recorder.hpp"

namespace adjfree {
namespace {

constexpr double kBreakdownRatio = 1e-30;

bool degenerate(double inner, double scale) { return !std::isfinite(inner) || std::abs(inner) < kBreakdownRatio * scale; }

void require_square(const Problem& p) {
  p.validate();
  if (p.op.rows() != p.op.cols()) throw Error(ErrorCode::NotSquare, "operator must be square; embed it first");
}

// residual = Av − b
void true_residual(const Problem& p, std::span<const double> v, Vector& residual) {
  p.op.apply(v, residual);
  for (std::size_t i = 0; i < residual.size(); ++i) residual[i] -= p.rhs[i];
}

}  // namespace

SolverTrace run_tfqmr(const Problem& p, const SolveOptions& opts) {
  require_square(p);
  detail::TraceRecorder recorder(Method::Tfqmr, p, opts);
  const std::size_t n = p.op.cols();

  Vector x(n, 0.0);
  Vector residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = -p.rhs[i];

  std::size_t k = 0;
  double rnorm = norm2(residual);
  if (recorder.observe(k, rnorm, 0.0, x, residual)) return recorder.finish(std::move(x));
  if (rnorm == 0.0) {
    recorder.exact(k, rnorm, x, residual);
    return recorder.finish(std::move(x));
  }

  // Recurrence vectors in the b − Ax convention.
  const Vector rstar(p.rhs.begin(), p.rhs.end());
  Vector w = rstar;
  Vector u = rstar;
  Vector u_next(n);
  Vector uhat = p.op.apply(u);
  Vector v = uhat;
  Vector d(n, 0.0);
  const double rstar_norm = norm2(rstar);
  double theta = 0.0;
  double eta = 0.0;
  double alpha = 0.0;
  double rho = dot(rstar, rstar);
  double rho_last = rho;
  double tau = std::sqrt(rho);

  while (true) {
    const bool even = k % 2 == 0;
    if (even) {
      const double vr = dot(rstar, v);
      if (degenerate(vr, rstar_norm * norm2(v))) {
        recorder.breakdown(k, rnorm, x, residual, "breakdown: <r*, v> vanished");
        return recorder.finish(std::move(x));
      }
      alpha = rho / vr;
      for (std::size_t i = 0; i < n; ++i) u_next[i] = u[i] - alpha * v[i];
    }
    axpy(-alpha, uhat, w);
    const double dscale = theta * theta / alpha * eta;
    for (std::size_t i = 0; i < n; ++i) d[i] = u[i] + dscale * d[i];
    theta = norm2(w) / tau;
    const double cval = 1.0 / std::sqrt(1.0 + theta * theta);
    tau *= theta * cval;
    eta = cval * cval * alpha;
    axpy(eta, d, x);

    if (!even) {
      rho = dot(rstar, w);
      if (degenerate(rho_last, rstar_norm * rstar_norm)) {
        recorder.breakdown(k, rnorm, x, residual, "breakdown: rho vanished");
        return recorder.finish(std::move(x));
      }
      const double beta = rho / rho_last;
      for (std::size_t i = 0; i < n; ++i) u[i] = w[i] + beta * u[i];
      for (std::size_t i = 0; i < n; ++i) v[i] = beta * uhat[i] + beta * beta * v[i];
      if (!all_finite(u)) {
        recorder.breakdown(k + 1, rnorm, x, residual, "non-finite recurrence");
        return recorder.finish(std::move(x));
      }
      p.op.apply(u, uhat);
      axpy(1.0, uhat, v);
    } else {
      if (!all_finite(u_next)) {
        recorder.breakdown(k + 1, rnorm, x, residual, "non-finite recurrence");
        return recorder.finish(std::move(x));
      }
      p.op.apply(u_next, uhat);
      u.swap(u_next);
      rho_last = rho;
    }
    ++k;

    if (!all_finite(x)) {
      recorder.breakdown(k, std::numeric_limits<double>::infinity(), x, residual, "non-finite iterate");
      return recorder.finish(std::move(x));
    }
    true_residual(p, x, residual);
    rnorm = norm2(residual);
    if (recorder.observe(k, rnorm, eta, x, residual)) return recorder.finish(std::move(x));
    if (rnorm == 0.0) {
      recorder.exact(k, rnorm, x, residual);
      return recorder.finish(std::move(x));
    }
  }
}

SolverTrace run_cgs(const Problem& p, const SolveOptions& opts) {
  require_square(p);
  detail::TraceRecorder recorder(Method::Cgs, p, opts);
  const std::size_t n = p.op.cols();

  Vector x(n, 0.0);
  Vector residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = -p.rhs[i];

  std::size_t k = 0;
  double rnorm = norm2(residual);
  if (recorder.observe(k, rnorm, 0.0, x, residual)) return recorder.finish(std::move(x));
  if (rnorm == 0.0) {
    recorder.exact(k, rnorm, x, residual);
    return recorder.finish(std::move(x));
  }

  // Recursively updated residual r = b − Ax, as in the textbook algorithm.
  Vector r(p.rhs.begin(), p.rhs.end());
  const Vector rstar = r;
  const double rstar_norm = norm2(rstar);
  Vector u = r;
  Vector pdir = r;
  Vector q(n);
  Vector ap(n);
  Vector uq(n);
  Vector auq(n);
  double rho = dot(r, rstar);

  while (true) {
    if (degenerate(rho, rstar_norm * norm2(r))) {
      recorder.breakdown(k, rnorm, x, residual, "breakdown: <r, r*> vanished");
      return recorder.finish(std::move(x));
    }
    if (!all_finite(pdir)) {
      recorder.breakdown(k, rnorm, x, residual, "non-finite recurrence");
      return recorder.finish(std::move(x));
    }
    p.op.apply(pdir, ap);
    const double sigma = dot(ap, rstar);
    if (degenerate(sigma, rstar_norm * norm2(ap))) {
      recorder.breakdown(k, rnorm, x, residual, "breakdown: <Ap, r*> vanished");
      return recorder.finish(std::move(x));
    }
    const double alpha = rho / sigma;
    for (std::size_t i = 0; i < n; ++i) {
      q[i] = u[i] - alpha * ap[i];
      uq[i] = u[i] + q[i];
    }
    if (!all_finite(uq)) {
      recorder.breakdown(k, rnorm, x, residual, "non-finite recurrence");
      return recorder.finish(std::move(x));
    }
    axpy(alpha, uq, x);
    p.op.apply(uq, auq);
    axpy(-alpha, auq, r);
    const double rho_next = dot(r, rstar);
    const double beta = rho_next / rho;
    rho = rho_next;
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = r[i] + beta * q[i];
      pdir[i] = u[i] + beta * (q[i] + beta * pdir[i]);
    }
    ++k;

    if (!all_finite(x)) {
      recorder.breakdown(k, std::numeric_limits<double>::infinity(), x, residual, "non-finite iterate");
      return recorder.finish(std::move(x));
    }
    true_residual(p, x, residual);
    rnorm = norm2(residual);
    if (recorder.observe(k, rnorm, alpha, x, residual)) return recorder.finish(std::move(x));
    if (rnorm == 0.0) {
      recorder.exact(k, rnorm, x, residual);
      return recorder.finish(std::move(x));
    }
  }
}

}  // namespace adjfree
