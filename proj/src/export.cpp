#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "adjfree/errors.hpp"
#include "adjfree/io.hpp"

namespace adjfree {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError(line, "invalid number '" + s + "'");
  return value;
}

std::uint64_t parse_uint(const std::string& s, std::size_t line) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError(line, "invalid integer '" + s + "'");
  return value;
}

template <typename T>
void put_optional(nlohmann::json& j, const char* key, const std::optional<T>& value) {
  if (value) j[key] = *value;
  else j[key] = nullptr;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw Error(ErrorCode::IoError, "float formatting failed");
  return std::string(buf, ptr);
}

void write_trace_csv(const SolverTrace& trace, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const auto& rec : trace.records) {
    const double rel = trace.rhs_norm > 0.0 ? rec.residual_norm / trace.rhs_norm
                                            : (rec.residual_norm == 0.0 ? 0.0 : INFINITY);
    out << rec.k << ',' << format_double(rec.residual_norm) << ',' << format_double(rel) << ','
        << format_double(rec.stepsize) << ',';
    if (rec.error_norm) out << format_double(*rec.error_norm);
    out << ',';
    if (rec.ls_residual_norm) out << format_double(*rec.ls_residual_norm);
    out << ',' << rec.apply_count << ',' << rec.wall_ns << '\n';
  }
}

void write_trace_csv(const SolverTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_trace_csv(trace, out);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw ParseError(1, "missing trace header");
  std::vector<TraceRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 8) throw ParseError(lineno, "expected 8 fields");
    TraceRow row;
    row.record.k = parse_uint(f[0], lineno);
    row.record.residual_norm = parse_double(f[1], lineno);
    row.rel_residual = parse_double(f[2], lineno);
    row.record.stepsize = parse_double(f[3], lineno);
    if (!f[4].empty()) row.record.error_norm = parse_double(f[4], lineno);
    if (!f[5].empty()) row.record.ls_residual_norm = parse_double(f[5], lineno);
    row.record.apply_count = parse_uint(f[6], lineno);
    row.record.wall_ns = parse_uint(f[7], lineno);
    rows.push_back(row);
  }
  return rows;
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_trace_csv(in);
}

void write_report_json(const nlohmann::json& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << report.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

nlohmann::json to_json(const RateReport& r) {
  nlohmann::json j;
  j["c"] = r.c;
  j["tau"] = r.tau;
  j["sigma_max"] = r.sigma_max;
  j["sigma_min"] = r.sigma_min;
  j["lambda_max_AtA"] = r.lambda_max;
  j["lambda_min_AtA"] = r.lambda_min;
  j["frobenius_squared"] = r.frobenius_squared;
  put_optional(j, "kappa", r.kappa);
  put_optional(j, "tau_opt", r.tau_opt);
  put_optional(j, "lambda_opt", r.lambda_opt);
  put_optional(j, "lambda", r.lambda);
  put_optional(j, "beta", r.beta);
  put_optional(j, "m_min_eig", r.m_min_eig);
  put_optional(j, "rd_bound", r.rd_bound);
  put_optional(j, "rd_bound_range", r.rd_bound_range);
  put_optional(j, "bracket_lower", r.bracket_lower);
  put_optional(j, "bracket_upper", r.bracket_upper);
  j["notes"] = r.notes;
  return j;
}

nlohmann::json to_json(const NormalBounds& b) {
  return {{"lower", b.lower}, {"upper", b.upper}, {"approx_lower", b.approx_lower}, {"approx_upper", b.approx_upper}};
}

nlohmann::json summary_json(const SolverTrace& t) {
  nlohmann::json j;
  j["method"] = method_token(t.method);
  if (t.options.sampler) j["sampler"] = sampler_token(t.options.sampler->kind());
  j["termination"] = termination_name(t.termination);
  j["detail"] = t.detail;
  j["iterations"] = t.iterations;
  j["final_rel_residual"] = t.final_relative_residual();
  j["final_residual_norm"] = t.records.empty() ? 0.0 : t.last().residual_norm;
  j["solution_norm"] = norm2(t.final_iterate);
  j["total_applies"] = t.total_applies;
  j["adjoint_applies"] = t.adjoint_applies;
  j["stepsize"] = t.stepsize;
  j["null_steps"] = t.null_steps;
  j["refreshes"] = t.refreshes;
  j["max_refresh_drift"] = t.max_refresh_drift;
  j["embedded"] = t.embedded;
  j["wall_ns"] = t.wall_ns;
  if (!t.records.empty() && t.last().error_norm) j["final_error_norm"] = *t.last().error_norm;
  return j;
}

}  // namespace adjfree
