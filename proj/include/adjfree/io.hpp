#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "adjfree/analysis.hpp"
#include "adjfree/operator.hpp"
#include "adjfree/solvers.hpp"

namespace adjfree {

// ------------------------------------------------------------ MatrixMarket

/// Reads `matrix coordinate {real|integer} {general|symmetric}`. Symmetric
/// entries are mirrored, duplicates summed. Throws ParseError with the
/// 1-based line number, UnsupportedFormat for pattern/complex/array files and
/// IoError when the file cannot be opened.
CsrMatrix parse_matrix_market(std::istream& in);
CsrMatrix read_matrix_market_csr(const std::filesystem::path& path);
LinearOperator read_matrix_market(const std::filesystem::path& path, Capability cap = Capability::WithAdjoint);

/// Writes `matrix coordinate real general` with shortest round-trip values.
void write_matrix_market(const CsrMatrix& a, std::ostream& out);
void write_matrix_market(const CsrMatrix& a, const std::filesystem::path& path);

// ------------------------------------------------------------ problem generation

struct ProblemGenSpec {
  std::size_t m = 0;
  std::size_t d = 0;
  double density = 1.0;
  std::uint64_t seed = 0;
  /// Absent for a consistent system b = Av̂. Otherwise b = Av̂ + r with
  /// r = level·(‖Av̂‖/√m)·ξ, ξ standard normal.
  std::optional<double> noise_level;

  void validate() const;
  std::size_t nnz() const;
};

/// Above this m·d the noise split into rg(A) and its complement is skipped.
inline constexpr std::size_t kNoiseSplitMaxEntries = 250000;

Problem generate_problem(const ProblemGenSpec& spec, Capability cap = Capability::WithAdjoint);

struct RoughSolution {
  std::uint64_t seed = 0;
};
using InverseIntegrationSolution = std::variant<RoughSolution, Vector>;

/// High-frequency test signal: signs from a Markov chain that flips with
/// probability 0.75, magnitudes 1 + 0.2·η.
Vector rough_solution(std::size_t d, std::uint64_t seed);

/// CumSum operator with b̃ = Av̂ + r and ‖r‖ = noise_level·‖Av̂‖ exactly.
Problem make_inverse_integration_problem(std::size_t d, const InverseIntegrationSolution& solution, double noise_level,
                                         std::uint64_t seed, Capability cap = Capability::WithAdjoint);

// ------------------------------------------------------------ export

inline constexpr const char* kTraceHeader =
    "k,residual_norm,rel_residual,stepsize,error_norm,ls_residual_norm,apply_count,wall_ns";

/// Shortest decimal string that parses back to the same double.
std::string format_double(double x);

void write_trace_csv(const SolverTrace& trace, std::ostream& out);
void write_trace_csv(const SolverTrace& trace, const std::filesystem::path& path);

struct TraceRow {
  IterationRecord record;
  double rel_residual = 0.0;
};
std::vector<TraceRow> read_trace_csv(std::istream& in);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

/// Keys are sorted (nlohmann::json objects are ordered maps); 2-space indent.
void write_report_json(const nlohmann::json& report, const std::filesystem::path& path);

nlohmann::json to_json(const RateReport& report);
nlohmann::json to_json(const NormalBounds& bounds);
/// Trace summary without the per-iteration records.
nlohmann::json summary_json(const SolverTrace& trace);

}  // namespace adjfree
