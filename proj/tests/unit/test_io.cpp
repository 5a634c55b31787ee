#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "adjfree/errors.hpp"
#include "adjfree/io.hpp"

namespace {

using namespace adjfree;
namespace fs = std::filesystem;

const fs::path kFixtures = ADJFREE_FIXTURE_DIR;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("adjfree_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CsrMatrix parse(const std::string& text) {
  std::istringstream in(text);
  return parse_matrix_market(in);
}

ErrorCode parse_code(const std::string& text) {
  try {
    (void)parse(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return ErrorCode::InvalidArgument;
}

std::size_t parse_error_line(const std::string& text) {
  try {
    (void)parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  ADD_FAILURE() << "no parse error for:\n" << text;
  return 0;
}

// ------------------------------------------------------------ MatrixMarket

TEST(MatrixMarket, IdentityFixture) {
  const LinearOperator op = read_matrix_market(kFixtures / "identity2.mtx");
  EXPECT_EQ(op.rows(), 2u);
  EXPECT_EQ(op.csr_storage()->nnz(), 2u);
  EXPECT_EQ(op.apply(Vector{1, 2}), (Vector{1, 2}));
  const CsrMatrix ints = read_matrix_market_csr(kFixtures / "identity5.mtx");
  EXPECT_EQ(ints.to_dense(), DenseMatrix::identity(5));
}

TEST(MatrixMarket, SymmetricEntriesAreMirrored) {
  const DenseMatrix a = read_matrix_market_csr(kFixtures / "symmetric3.mtx").to_dense();
  EXPECT_EQ(a, DenseMatrix(3, 3, {2, -1, 0, -1, 2, -1, 0, -1, 0}));
}

TEST(MatrixMarket, CommentsAndDuplicates) {
  const CsrMatrix a = parse(
      "%%MatrixMarket matrix coordinate real general\n"
      "% comment\n"
      "\n"
      "2 2 3\n"
      "1 2 1.5\n"
      "% another\n"
      "1 2 2.5\n"
      "2 1 -1e-3\n");
  EXPECT_EQ(a.nnz(), 2u);
  EXPECT_EQ(a.to_dense(), DenseMatrix(2, 2, {0, 4.0, -1e-3, 0}));
}

TEST(MatrixMarket, UnsupportedVariants) {
  EXPECT_EQ(parse_code("%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n"), ErrorCode::UnsupportedFormat);
  EXPECT_EQ(parse_code("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n"),
            ErrorCode::UnsupportedFormat);
  EXPECT_EQ(parse_code("%%MatrixMarket matrix array real general\n1 1\n1\n"), ErrorCode::UnsupportedFormat);
  EXPECT_EQ(parse_code("%%MatrixMarket matrix coordinate real skew-symmetric\n1 1 1\n1 1 1\n"),
            ErrorCode::UnsupportedFormat);
}

TEST(MatrixMarket, ParseErrorsCarryLineNumbers) {
  EXPECT_EQ(parse_error_line(""), 1u);
  EXPECT_EQ(parse_error_line("matrix 2 2\n"), 1u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate real general\n2 2\n"), 2u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n"), 3u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 x\n"), 3u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate real general\n% c\n2 2 1\n1 1 1\n2 2 2\n"), 5u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n"), 3u);
  EXPECT_EQ(parse_error_line("%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 1\n"), 2u);
}

TEST(MatrixMarket, MissingFileIsAnIoError) {
  try {
    (void)read_matrix_market(kFixtures / "does_not_exist.mtx");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(MatrixMarket, RoundTripIsBitExact) {
  const CsrMatrix a = read_matrix_market_csr(kFixtures / "roundtrip.mtx");
  std::ostringstream out;
  write_matrix_market(a, out);
  const CsrMatrix b = parse(out.str());
  EXPECT_EQ(a.row_ptr, b.row_ptr);
  EXPECT_EQ(a.col_idx, b.col_idx);
  ASSERT_EQ(a.values.size(), b.values.size());
  EXPECT_EQ(std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)), 0);

  const fs::path dir = scratch_dir("mtx");
  const Problem p = generate_problem(ProblemGenSpec{40, 30, 0.2, 3, std::nullopt});
  write_matrix_market(*p.op.csr_storage(), dir / "gen.mtx");
  EXPECT_EQ(read_matrix_market_csr(dir / "gen.mtx"), *p.op.csr_storage());
}

// ------------------------------------------------------------ generation

TEST(Generate, DenseConsistentSystem) {
  const Problem p = generate_problem(ProblemGenSpec{2, 2, 1.0, 1, std::nullopt});
  EXPECT_EQ(p.op.csr_storage()->nnz(), 4u);
  EXPECT_EQ(subtract(p.op.apply(*p.ground_truth), p.rhs), (Vector{0, 0}));
  EXPECT_FALSE(p.noise);
  EXPECT_EQ(p.op.apply_count(), 1u);
}

TEST(Generate, DeterministicAndExactNnz) {
  const ProblemGenSpec spec{300, 1200, 0.1, 42, std::nullopt};
  const Problem a = generate_problem(spec), b = generate_problem(spec);
  EXPECT_EQ(*a.op.csr_storage(), *b.op.csr_storage());
  EXPECT_EQ(a.rhs, b.rhs);
  EXPECT_EQ(a.op.csr_storage()->nnz(), 36000u);
  const Problem c = generate_problem(ProblemGenSpec{300, 1200, 0.1, 43, std::nullopt});
  EXPECT_NE(a.rhs, c.rhs);
}

TEST(Generate, NoiseLevelAndSplit) {
  const Problem p = generate_problem(ProblemGenSpec{60, 20, 0.5, 7, 0.1});
  ASSERT_TRUE(p.noise);
  const Vector clean = p.op.apply(*p.ground_truth);
  const double rel = norm2(p.noise->r) / norm2(clean);
  EXPECT_NEAR(rel, 0.1, 0.02);
  for (std::size_t i = 0; i < 60; ++i) EXPECT_NEAR(p.rhs[i] - clean[i], p.noise->r[i], 1e-14);
  ASSERT_TRUE(p.noise->r_range && p.noise->r_perp);
  EXPECT_NEAR(squared_norm(*p.noise->r_range) + squared_norm(*p.noise->r_perp), squared_norm(p.noise->r), 1e-12);
  EXPECT_NEAR(*p.noise->range_noise_norm, norm2(p.op.apply_adjoint(p.noise->r)), 1e-12);
  EXPECT_NEAR(p.noise_norm(), norm2(p.noise->r), 0.0);
}

TEST(Generate, Validation) {
  for (const auto& spec : {ProblemGenSpec{0, 2, 1.0, 0, std::nullopt}, ProblemGenSpec{2, 2, 0.0, 0, std::nullopt},
                           ProblemGenSpec{2, 2, 1.5, 0, std::nullopt}, ProblemGenSpec{10, 10, 1e-4, 0, std::nullopt},
                           ProblemGenSpec{2, 2, 1.0, 0, -1.0}}) {
    EXPECT_THROW(spec.validate(), Error);
  }
}

TEST(InverseIntegration, Construction) {
  const Problem p = make_inverse_integration_problem(100, RoughSolution{11}, 1e-3, 7);
  EXPECT_EQ(p.op.rows(), 100u);
  EXPECT_EQ(p.op.backend(), BackendKind::CumSum);
  const Vector clean = p.op.apply(*p.ground_truth);
  EXPECT_NEAR(p.noise_norm(), 1e-3 * norm2(clean), 1e-15 * norm2(clean));
  EXPECT_EQ(squared_norm(*p.noise->r_perp), 0.0);

  const Problem exact = make_inverse_integration_problem(10, Vector(10, 1.0), 0.0, 7);
  EXPECT_EQ(exact.noise_norm(), 0.0);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(exact.rhs[i], static_cast<double>(i + 1));
  EXPECT_THROW((void)make_inverse_integration_problem(1, RoughSolution{1}, 0.0, 0), Error);
  EXPECT_THROW((void)make_inverse_integration_problem(10, Vector(9, 1.0), 0.0, 0), Error);
}

TEST(InverseIntegration, RoughSolutionIsHighFrequency) {
  const Vector v = rough_solution(100, 11);
  int flips = 0;
  for (std::size_t i = 1; i < v.size(); ++i) flips += (v[i] > 0) != (v[i - 1] > 0);
  EXPECT_GT(flips, 60);
  EXPECT_EQ(v, rough_solution(100, 11));
}

// ------------------------------------------------------------ export

SolverTrace small_trace() {
  const Problem p = generate_problem(ProblemGenSpec{10, 8, 1.0, 2, std::nullopt});
  SolveOptions o;
  o.sampler = SamplerSpec(SamplerKind::NormalStd, 8);
  o.stopping = {MaxIter{12}};
  o.track_ls_residual = true;
  return run_rd(p, o);
}

TEST(TraceCsv, EmptyAndSingleRecord) {
  SolverTrace t;
  std::ostringstream empty;
  write_trace_csv(t, empty);
  EXPECT_EQ(empty.str(), std::string(kTraceHeader) + "\n");

  t.rhs_norm = 2.0;
  IterationRecord rec;
  rec.residual_norm = 1.0;
  rec.apply_count = 3;
  t.records.push_back(rec);
  std::ostringstream one;
  write_trace_csv(t, one);
  EXPECT_EQ(one.str(), std::string(kTraceHeader) + "\n0,1,0.5,0,,,3,0\n");
}

TEST(TraceCsv, RoundTripIsBitExact) {
  const SolverTrace t = small_trace();
  std::stringstream buf;
  write_trace_csv(t, buf);
  const auto rows = read_trace_csv(buf);
  ASSERT_EQ(rows.size(), t.records.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& a = rows[i].record;
    const auto& b = t.records[i];
    EXPECT_EQ(a.k, b.k);
    EXPECT_EQ(a.residual_norm, b.residual_norm);
    EXPECT_EQ(a.stepsize, b.stepsize);
    EXPECT_EQ(a.error_norm, b.error_norm);
    EXPECT_EQ(a.ls_residual_norm, b.ls_residual_norm);
    EXPECT_EQ(a.apply_count, b.apply_count);
    EXPECT_EQ(a.wall_ns, b.wall_ns);
  }
}

TEST(TraceCsv, RejectsMalformedInput) {
  std::istringstream no_header("1,2,3\n");
  EXPECT_THROW((void)read_trace_csv(no_header), ParseError);
  std::istringstream short_row(std::string(kTraceHeader) + "\n0,1,1\n");
  try {
    (void)read_trace_csv(short_row);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  for (double x : {1.0 / 3.0, 6.02214076e23, 4.9406564584124654e-324, -2.5e-300, 1e308}) {
    EXPECT_EQ(std::strtod(format_double(x).c_str(), nullptr), x);
  }
}

TEST(ReportJson, SortedKeysAndSummary) {
  const fs::path dir = scratch_dir("json");
  const SolverTrace t = small_trace();
  nlohmann::json report;
  report["zeta"] = 1;
  report["alpha"] = summary_json(t);
  write_report_json(report, dir / "r.json");
  std::ifstream in(dir / "r.json");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_LT(text.find("\"alpha\""), text.find("\"zeta\""));
  const auto parsed = nlohmann::json::parse(text);
  EXPECT_EQ(parsed["alpha"]["method"], "rd");
  EXPECT_EQ(parsed["alpha"]["sampler"], "normal");
  EXPECT_EQ(parsed["alpha"]["iterations"], 12);
  EXPECT_EQ(parsed["alpha"]["termination"], "MaxIterReached");

  const nlohmann::json b = to_json(normal_M_eigen_bounds(Vector{1, 1, 1}, 3));
  EXPECT_TRUE(b.contains("lower") && b.contains("approx_upper"));
}

}  // namespace
