#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>

#include "adjfree/errors.hpp"
#include "adjfree/io.hpp"
#include "adjfree/solvers.hpp"

namespace {

using namespace adjfree;

template <typename T>
void expect_error(ErrorCode code, T&& fn) {
  try {
    fn();
    FAIL() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

Problem identity_problem(Vector rhs) {
  const std::size_t n = rhs.size();
  return Problem{LinearOperator::dense(DenseMatrix::identity(n)), std::move(rhs), std::nullopt, std::nullopt};
}

SolveOptions with_sampler(SamplerKind kind, std::size_t d, StoppingRule rule) {
  SolveOptions o;
  o.sampler = SamplerSpec(kind, d);
  o.stopping = std::move(rule);
  return o;
}

TEST(GradientSample, Examples) {
  EXPECT_EQ(sgdas_gradient_sample(Vector{0, 0}, Vector{1, 2}, Vector{1, 2}), (Vector{0, 0}));
  const double s = std::sqrt(2.0);
  const LinearOperator id = LinearOperator::dense(DenseMatrix::identity(2));
  const Vector g = sgdas_gradient_sample(id, Vector{-1, 0}, Vector{s, 0});
  EXPECT_NEAR(g[0], -2.0, 1e-15);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_EQ(id.apply_count(), 1u);
}

TEST(GradientSample, MatchesDenseOracle) {
  const Problem p = generate_problem(ProblemGenSpec{7, 4, 1.0, 3, std::nullopt});
  const DenseMatrix a = materialize(p.op);
  Eigen::MatrixXd e(7, 4);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 4; ++j) e(i, j) = a(i, j);
  const Vector r{1, -2, 0.5, 0, 3, 1, -1};
  const Vector x{0.3, -1, 2, 1};
  const Eigen::VectorXd ex = Eigen::Map<const Eigen::VectorXd>(x.data(), 4);
  const Eigen::VectorXd er = Eigen::Map<const Eigen::VectorXd>(r.data(), 7);
  const Eigen::VectorXd ref = ex * ex.transpose() * e.transpose() * er;
  const Vector g = sgdas_gradient_sample(p.op, r, x);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(g[j], ref(j), 1e-12);
}

TEST(ExactStepsize, Examples) {
  EXPECT_EQ(exact_stepsize(Vector{1, 2}, Vector{0, 0}), 0.0);
  EXPECT_EQ(exact_stepsize(Vector{1, 0}, Vector{0, 3}), 0.0);
  const double tau = exact_stepsize(Vector{-2, 0}, Vector{1, 1});
  EXPECT_DOUBLE_EQ(tau, 1.0);
  // Below the relative null threshold the direction is treated as null.
  EXPECT_EQ(exact_stepsize(Vector{1, 0}, Vector{1e-15, 0}, 1.0), 0.0);
  EXPECT_NE(exact_stepsize(Vector{1, 0}, Vector{1e-13, 0}, 1.0), 0.0);
}

TEST(ExactStepsize, MinimizesOverAGrid) {
  RngState rng(1, 0);
  for (int trial = 0; trial < 50; ++trial) {
    Vector r(6), ax(6);
    for (auto& x : r) x = rng.normal();
    for (auto& x : ax) x = rng.normal();
    const double tau = exact_stepsize(r, ax);
    auto objective = [&](double t) {
      double s = 0.0;
      for (std::size_t i = 0; i < 6; ++i) s += (r[i] + t * ax[i]) * (r[i] + t * ax[i]);
      return s;
    };
    const double best = objective(tau);
    for (int g = -200; g <= 200; ++g) EXPECT_LE(best, objective(tau + 0.01 * g) + 1e-12);
  }
}

TEST(Sgdas, SingleCoordinateStepHitsTheSolution) {
  const Problem p = identity_problem({1, 0});
  SolveOptions o = with_sampler(SamplerKind::Coordinate, 2, {MaxIter{1}});
  o.stepsize = FixedStep{0.5};
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    o.seed = seed;
    RngState replay(seed, 0);
    const Vector x = sample(*o.sampler, replay);
    const SolverTrace t = run_sgdas(p, o);
    if (x[0] != 0.0) {
      EXPECT_NEAR(t.final_iterate[0], 1.0, 1e-15);
      EXPECT_EQ(t.final_iterate[1], 0.0);
      EXPECT_LT(t.records.back().residual_norm, 1e-15);
    } else {
      EXPECT_EQ(t.final_iterate, (Vector{0, 0}));
    }
  }
}

TEST(Sgdas, ZeroRhsConvergesImmediately) {
  for (const auto method : {Method::Sgdas, Method::RandomDescent, Method::Landweber}) {
    const Problem p = identity_problem({0, 0, 0});
    const SolverTrace t = run_solver(method, p, with_sampler(SamplerKind::Rademacher, 3, {RelResidual{1e-6}, MaxIter{5}}));
    EXPECT_EQ(t.termination, Termination::Converged) << method_token(method);
    EXPECT_EQ(t.iterations, 0u);
    EXPECT_EQ(t.final_iterate, (Vector{0, 0, 0}));
  }
}

TEST(Sgdas, RejectsNonIsotropicSampler) {
  const Problem p = identity_problem({1, 1});
  SolveOptions o;
  o.sampler = SamplerSpec::weighted({0.5, 0.5});
  expect_error(ErrorCode::NotIsotropic, [&] { (void)run_sgdas(p, o); });
  EXPECT_NO_THROW((void)run_rd(p, o));
}

TEST(RandomSolvers, NeedAMatchingSampler) {
  const Problem p = identity_problem({1, 1});
  SolveOptions o;
  expect_error(ErrorCode::InvalidArgument, [&] { (void)run_rd(p, o); });
  o.sampler = SamplerSpec(SamplerKind::Rademacher, 3);
  expect_error(ErrorCode::DimensionMismatch, [&] { (void)run_sgdas(p, o); });
  o.sampler = SamplerSpec(SamplerKind::Rademacher, 2);
  o.residual_refresh_every = 0;
  expect_error(ErrorCode::InvalidArgument, [&] { (void)run_rd(p, o); });
  o.residual_refresh_every = 10;
  o.record_stride = 0;
  expect_error(ErrorCode::InvalidArgument, [&] { (void)run_rd(p, o); });
}

TEST(Sgdas, ExpectedDecreaseMatchesTheoryOnAverage) {
  // With τ = 1/(c‖A‖²) each step contracts E‖v − v̂‖² for a consistent system.
  const Problem p = generate_problem(ProblemGenSpec{30, 10, 1.0, 4, std::nullopt});
  double first = 0.0, later = 0.0;
  const int runs = 50;
  for (int s = 0; s < runs; ++s) {
    SolveOptions o = with_sampler(SamplerKind::Rademacher, 10, {MaxIter{200}});
    o.stepsize = NormSurrogateStep{2.0, 64};
    o.seed = static_cast<std::uint64_t>(s);
    const SolverTrace t = run_sgdas(p, o);
    first += *t.records.front().error_norm;
    later += *t.records.back().error_norm;
  }
  EXPECT_LT(later / runs, 0.5 * first / runs);
}

class RdProperty : public ::testing::TestWithParam<SamplerKind> {};

TEST_P(RdProperty, ResidualNeverIncreases) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Problem p = generate_problem(ProblemGenSpec{25 + seed, 15, 0.4, seed, 1e-2});
    SolveOptions o;
    o.sampler = GetParam() == SamplerKind::WeightedCoordinate ? SamplerSpec::weighted(kaczmarz_weights(p.op).weights)
                                                              : SamplerSpec(GetParam(), 15);
    o.stopping = {MaxIter{300}};
    o.residual_refresh_every = 50;
    o.seed = seed;
    const SolverTrace t = run_rd(p, o);
    for (std::size_t k = 1; k < t.records.size(); ++k) {
      ASSERT_LE(t.records[k].residual_norm, t.records[k - 1].residual_norm * (1.0 + 1e-10) + 1e-14)
          << "k=" << k << " seed=" << seed;
    }
  }
}

TEST_P(RdProperty, IncrementalResidualStaysAccurate) {
  const Problem p = generate_problem(ProblemGenSpec{60, 40, 0.3, 8, std::nullopt});
  SolveOptions o;
  o.sampler = GetParam() == SamplerKind::WeightedCoordinate ? SamplerSpec::weighted(kaczmarz_weights(p.op).weights)
                                                            : SamplerSpec(GetParam(), 40);
  o.stopping = {MaxIter{3000}};
  o.residual_refresh_every = 500;
  const SolverTrace t = run_rd(p, o);
  EXPECT_EQ(t.refreshes, 6u);
  EXPECT_LT(t.max_refresh_drift, 1e-8);
  const Vector r = subtract(p.op.apply(t.final_iterate), p.rhs);
  EXPECT_NEAR(norm2(r), t.records.back().residual_norm, 1e-9 * norm2(p.rhs));
}

INSTANTIATE_TEST_SUITE_P(AllSamplers, RdProperty,
                         ::testing::Values(SamplerKind::Rademacher, SamplerKind::Coordinate,
                                           SamplerKind::WeightedCoordinate, SamplerKind::NormalStd,
                                           SamplerKind::SphereSqrtD),
                         [](const auto& info) { return sampler_token(info.param); });

TEST(Rd, OneForwardApplicationPerIteration) {
  const Problem p = generate_problem(ProblemGenSpec{40, 30, 0.5, 2, std::nullopt});
  SolveOptions o = with_sampler(SamplerKind::NormalStd, 30, {MaxIter{250}});
  o.residual_refresh_every = 100;
  const SolverTrace t = run_rd(p, o);
  EXPECT_EQ(t.iterations, 250u);
  EXPECT_EQ(t.total_applies, 250u + t.refreshes);
  EXPECT_EQ(t.adjoint_applies, 0u);
  EXPECT_EQ(t.records.back().apply_count, t.total_applies);
}

TEST(Rd, WorksOnForwardOnlyHandles) {
  const Problem p = generate_problem(ProblemGenSpec{20, 10, 1.0, 1, std::nullopt}, Capability::ForwardOnly);
  const SolverTrace t = run_rd(p, with_sampler(SamplerKind::Rademacher, 10, {RelResidual{1e-6}, MaxIter{20000}}));
  EXPECT_EQ(t.termination, Termination::Converged);
  EXPECT_LE(t.final_relative_residual(), 1e-6);
}

TEST(Rd, SameSeedSameTrace) {
  const Problem p = generate_problem(ProblemGenSpec{30, 20, 0.5, 5, std::nullopt});
  SolveOptions o = with_sampler(SamplerKind::SphereSqrtD, 20, {MaxIter{100}});
  o.seed = 99;
  const SolverTrace a = run_rd(p, o), b = run_rd(p, o);
  EXPECT_EQ(a.final_iterate, b.final_iterate);
  o.stream = 1;
  const SolverTrace c = run_rd(p, o);
  EXPECT_NE(a.final_iterate, c.final_iterate);
}

TEST(Rd, NullDirectionsAreCountedAndSkipped) {
  // Column 1 is zero: coordinate draws of e₂ are null steps.
  DenseMatrix a(2, 2);
  a(0, 0) = 1;
  a(1, 0) = 1;
  const Problem p{LinearOperator::dense(a), Vector{1, 1}, std::nullopt, std::nullopt};
  const SolverTrace t = run_rd(p, with_sampler(SamplerKind::Coordinate, 2, {MaxIter{100}}));
  EXPECT_GT(t.null_steps, 20u);
  EXPECT_LT(t.null_steps, 80u);
  EXPECT_EQ(t.final_iterate[1], 0.0);
  EXPECT_NEAR(t.final_iterate[0], 1.0, 1e-15);
}

TEST(Rd, OneStepDominatesSgdas) {
  const Problem p = generate_problem(ProblemGenSpec{15, 10, 1.0, 6, std::nullopt});
  const DenseMatrix a = materialize(p.op);
  const SolverTrace rd = run_rd(p, with_sampler(SamplerKind::Rademacher, 10, {MaxIter{1}}));
  for (const double tau : {1e-4, 1e-3, 1e-2}) {
    SolveOptions o = with_sampler(SamplerKind::Rademacher, 10, {MaxIter{1}});
    o.stepsize = FixedStep{tau};
    const SolverTrace sg = run_sgdas(p, o);
    EXPECT_LE(rd.records.back().residual_norm, sg.records.back().residual_norm + 1e-12);
  }
}

TEST(Rd, SphereAndNormalGiveTheSameIterates) {
  // RD is invariant under rescaling of the direction.
  const Problem p = generate_problem(ProblemGenSpec{20, 12, 0.5, 3, std::nullopt});
  const SolverTrace a = run_rd(p, with_sampler(SamplerKind::NormalStd, 12, {MaxIter{50}}));
  const SolverTrace b = run_rd(p, with_sampler(SamplerKind::SphereSqrtD, 12, {MaxIter{50}}));
  for (std::size_t j = 0; j < 12; ++j) EXPECT_NEAR(a.final_iterate[j], b.final_iterate[j], 1e-10);
}

TEST(Landweber, NeedsTheAdjoint) {
  const Problem p = generate_problem(ProblemGenSpec{5, 5, 1.0, 1, std::nullopt}, Capability::ForwardOnly);
  expect_error(ErrorCode::AdjointUnavailable, [&] { (void)run_landweber(p, SolveOptions{}); });
}

TEST(Landweber, UnitFactorSolvesInOneStep) {
  // A = 2I, ω = 1/4: ωσ² = 1 and the first step is exact.
  const Problem p{LinearOperator::dense(DenseMatrix(3, 3, {2, 0, 0, 0, 2, 0, 0, 0, 2})), Vector{2, 4, -6},
                  std::nullopt, std::nullopt};
  SolveOptions o;
  o.stepsize = OptimalSpectralStep{4.0, 4.0};
  o.stopping = {RelResidual{1e-14}, MaxIter{10}};
  const SolverTrace t = run_landweber(p, o);
  EXPECT_EQ(t.termination, Termination::Converged);
  EXPECT_EQ(t.iterations, 1u);
  EXPECT_EQ(t.final_iterate, (Vector{1, 2, -3}));
  EXPECT_DOUBLE_EQ(t.stepsize, 0.25);
}

TEST(Landweber, DefaultStepsizeConvergesOnWideOperators) {
  const Problem p = generate_problem(ProblemGenSpec{30, 120, 0.2, 4, std::nullopt});
  SolveOptions o;
  o.stopping = {RelResidual{1e-4}, MaxIter{20000}};
  const SolverTrace t = run_landweber(p, o);
  EXPECT_EQ(t.termination, Termination::Converged);
  // Power iteration for the default stepsize adds one adjoint per step.
  EXPECT_EQ(t.adjoint_applies, t.iterations + NormSurrogateStep{}.samples);
}

TEST(Stopping, Examples) {
  IterationRecord rec;
  rec.residual_norm = 0.009;
  EXPECT_TRUE(check_stop(rec, 1.0, {RelResidual{1e-2}}));
  rec.residual_norm = 1.0015;
  EXPECT_FALSE(check_stop(rec, 1.0, {Morozov{1.001, 1.0}}));
  rec.residual_norm = 1.0005;
  EXPECT_TRUE(check_stop(rec, 1.0, {Morozov{1.001, 1.0}}));
  rec.k = 10;
  rec.residual_norm = 5.0;
  const StoppingRule rule{MaxIter{10}, RelResidual{1e-9}};
  EXPECT_TRUE(check_stop(rec, 1.0, rule));
  EXPECT_EQ(first_satisfied(rec, 1.0, rule), std::size_t{0});
  rec.k = 9;
  EXPECT_FALSE(check_stop(rec, 1.0, rule));
  EXPECT_TRUE(check_stop(rec, 0.0, {RelResidual{1e-9}}));
}

TEST(Stopping, Validation) {
  expect_error(ErrorCode::InvalidArgument, [] { StoppingRule r{RelResidual{0.0}}; });
  expect_error(ErrorCode::InvalidArgument, [] { StoppingRule r{Morozov{0.99, 1.0}}; });
  expect_error(ErrorCode::InvalidArgument, [] { StoppingRule r{Morozov{1.0, -1.0}}; });
  EXPECT_NO_THROW((StoppingRule{MaxIter{0}}));
}

TEST(Stopping, MaxIterZeroRecordsTheStartingPoint) {
  const Problem p = identity_problem({1, 2});
  const SolverTrace t = run_rd(p, with_sampler(SamplerKind::Rademacher, 2, {MaxIter{0}}));
  EXPECT_EQ(t.termination, Termination::MaxIterReached);
  ASSERT_EQ(t.records.size(), 1u);
  EXPECT_EQ(t.records[0].k, 0u);
  EXPECT_DOUBLE_EQ(t.final_relative_residual(), 1.0);
}

TEST(Stopping, RecordStrideKeepsTheFinalRecord) {
  const Problem p = generate_problem(ProblemGenSpec{10, 10, 1.0, 1, std::nullopt});
  SolveOptions o = with_sampler(SamplerKind::Rademacher, 10, {MaxIter{23}});
  o.record_stride = 5;
  const SolverTrace t = run_rd(p, o);
  std::vector<std::size_t> ks;
  for (const auto& r : t.records) ks.push_back(r.k);
  EXPECT_EQ(ks, (std::vector<std::size_t>{0, 5, 10, 15, 20, 23}));
}

TEST(Tokens, MethodsRoundTrip) {
  for (const auto m : {Method::RandomDescent, Method::Sgdas, Method::Landweber, Method::Tfqmr, Method::Cgs}) {
    EXPECT_EQ(parse_method(method_token(m)), m);
  }
  EXPECT_EQ(parse_method("gmres"), std::nullopt);
  EXPECT_EQ(termination_name(Termination::Breakdown), "Breakdown");
}

}  // namespace
