#include "cli_commands.hpp"

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "adjfree/analysis.hpp"
#include "adjfree/errors.hpp"
#include "adjfree/sampling.hpp"

namespace adjfree::cli {
namespace fs = std::filesystem;

int exit_code_for(Termination t) {
  switch (t) {
    case Termination::Converged: return kExitConverged;
    case Termination::MaxIterReached: return kExitMaxIter;
    case Termination::Breakdown: return kExitBreakdown;
  }
  return kExitBreakdown;
}

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(sep, start), text.size());
    out.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

template <typename T>
T parse_value(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::InvalidArgument, "bad value for " + std::string(key) + ": '" + std::string(value) + "'");
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_pairs(std::string_view body) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& item : split(body, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::InvalidArgument, "expected key=value, got '" + item + "'");
    out.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  return out;
}

Vector standard_normal(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  RngState rng(seed, stream);
  Vector v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

std::string fmt(double x, int precision = 3) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(precision) << x;
  return s.str();
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    for (double x : xs) out.std += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(out.std / static_cast<double>(xs.size() - 1));
  }
  return out;
}

void set_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace

ProblemGenSpec parse_gen_spec(std::string_view text, std::uint64_t default_seed) {
  if (text.substr(0, 4) != "gen:") throw Error(ErrorCode::InvalidArgument, "gen-spec must start with 'gen:'");
  ProblemGenSpec spec;
  spec.seed = default_seed;
  bool have_m = false;
  bool have_d = false;
  for (const auto& [key, value] : parse_pairs(text.substr(4))) {
    if (key == "m") {
      spec.m = parse_value<std::size_t>(key, value);
      have_m = true;
    } else if (key == "d") {
      spec.d = parse_value<std::size_t>(key, value);
      have_d = true;
    } else if (key == "density") {
      spec.density = parse_value<double>(key, value);
    } else if (key == "seed") {
      spec.seed = parse_value<std::uint64_t>(key, value);
    } else if (key == "noise") {
      spec.noise_level = parse_value<double>(key, value);
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown gen-spec key '" + key + "'");
    }
  }
  if (!have_m || !have_d) throw Error(ErrorCode::InvalidArgument, "gen-spec needs m and d");
  spec.validate();
  return spec;
}

Problem load_problem(const std::string& matrix, std::uint64_t seed, Capability cap) {
  if (matrix.rfind("gen:", 0) == 0) return generate_problem(parse_gen_spec(matrix, seed), cap);
  LinearOperator op = [&] {
    if (matrix.rfind("cumsum:", 0) == 0) {
      std::size_t d = 0;
      for (const auto& [key, value] : parse_pairs(std::string_view(matrix).substr(7))) {
        if (key != "d") throw Error(ErrorCode::InvalidArgument, "cumsum spec takes only d");
        d = parse_value<std::size_t>(key, value);
      }
      if (d == 0) throw Error(ErrorCode::InvalidArgument, "cumsum spec needs d > 0");
      return LinearOperator::cumsum(d, cap);
    }
    return read_matrix_market(matrix, cap);
  }();
  Problem p{op, {}, standard_normal(op.cols(), seed, 3), std::nullopt};
  p.rhs = p.op.apply(*p.ground_truth);
  p.op.reset_counters();
  return p;
}

SamplerSpec make_sampler(std::string_view token, const LinearOperator& op) {
  const auto kind = parse_sampler(token);
  if (!kind) throw Error(ErrorCode::InvalidArgument, "unknown sampler '" + std::string(token) + "'");
  if (*kind == SamplerKind::WeightedCoordinate) return SamplerSpec::weighted(kaczmarz_weights(op).weights);
  return SamplerSpec(*kind, op.cols());
}

// ------------------------------------------------------------ ill-posed study

double fraction_above_in_small_half(const Vector& factors, const Vector& baseline) {
  const std::size_t r = std::min(factors.size(), baseline.size());
  const std::size_t start = r / 2;
  if (r == start) return 0.0;
  std::size_t above = 0;
  for (std::size_t i = start; i < r; ++i) above += factors[i] > baseline[i] ? 1 : 0;
  return static_cast<double>(above) / static_cast<double>(r - start);
}

IllposedResult run_illposed(const IllposedConfig& cfg) {
  set_threads(cfg.threads);
  IllposedResult res{make_inverse_integration_problem(cfg.d, RoughSolution{cfg.solution_seed}, cfg.noise, cfg.seed),
                     {}, 0.0, 0.0, {}, {}, {}};
  const Problem& p = res.problem;
  res.spectral = svd_small_dense(materialize(p.op));
  p.op.reset_counters();
  res.noise_norm = p.noise_norm();
  const SpectralData& sp = res.spectral;
  const Vector zero(cfg.d, 0.0);
  const Vector coeffs = singular_coefficients(*p.ground_truth, zero, sp);
  double total = 0.0;
  double small = 0.0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    total += coeffs[i] * coeffs[i];
    if (i >= coeffs.size() / 2) small += coeffs[i] * coeffs[i];
  }
  res.small_sigma_energy_fraction = total > 0.0 ? small / total : 0.0;

  const double norm_sq = sp.sigma_max() * sp.sigma_max();
  res.landweber_factors.resize(sp.rank);
  for (std::size_t i = 0; i < sp.rank; ++i) res.landweber_factors[i] = sp.singular_values[i] * sp.singular_values[i] / norm_sq;

  struct Plan {
    std::string name;
    Method method;
    std::optional<SamplerSpec> sampler;
  };
  std::vector<Plan> plans;
  for (const auto& name : cfg.methods) {
    if (name == "landweber") {
      plans.push_back({name, Method::Landweber, std::nullopt});
    } else if (name.rfind("rd-", 0) == 0) {
      plans.push_back({name, Method::RandomDescent, make_sampler(name.substr(3), p.op)});
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown ill-posed method '" + name + "'");
    }
  }

  for (std::size_t idx = 0; idx < plans.size(); ++idx) {
    if (!plans[idx].sampler) continue;
    RngState rng(cfg.seed, 1000 + idx);
    const MEstimate est = estimate_M(p.op, *plans[idx].sampler, rng, cfg.m_samples);
    const Vector mu = projected_mu(est.matrix, sp);
    Vector factors(sp.rank);
    for (std::size_t i = 0; i < sp.rank; ++i) factors[i] = mu[i] * sp.singular_values[i] * sp.singular_values[i];
    res.rd_factors.emplace_back(plans[idx].name.substr(3), std::move(factors));
  }

  res.methods.resize(plans.size());
  const double truth_norm = norm2(*p.ground_truth);
  const double threshold = cfg.morozov * res.noise_norm;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t idx = 0; idx < plans.size(); ++idx) {
    SolveOptions opts;
    opts.sampler = plans[idx].sampler;
    opts.stopping = StoppingRule{MaxIter{cfg.max_iter}};
    opts.seed = cfg.seed;
    opts.stream = idx;
    if (plans[idx].method == Method::Landweber) opts.stepsize = FixedStep{1.0 / norm_sq};
    IllposedMethodResult& out = res.methods[idx];
    out.name = plans[idx].name;
    out.trace = run_solver(plans[idx].method, p, opts);
    out.best_rel_error = INFINITY;
    for (const auto& rec : out.trace.records) {
      if (!rec.error_norm) continue;
      const double err = *rec.error_norm / truth_norm;
      if (err < out.best_rel_error) {
        out.best_rel_error = err;
        out.best_k = rec.k;
      }
      if (!out.morozov_k && rec.residual_norm <= threshold) {
        out.morozov_k = rec.k;
        out.morozov_rel_error = err;
      }
    }
  }
  return res;
}

nlohmann::json IllposedResult::to_json() const {
  nlohmann::json j;
  j["d"] = problem.op.cols();
  j["noise_norm"] = noise_norm;
  j["rhs_norm"] = norm2(problem.rhs);
  j["solution_norm"] = norm2(*problem.ground_truth);
  j["small_sigma_energy_fraction"] = small_sigma_energy_fraction;
  j["singular_values"] = spectral.singular_values;
  j["landweber_factors"] = landweber_factors;
  nlohmann::json factors = nlohmann::json::object();
  for (const auto& [name, values] : rd_factors) {
    factors[name] = {{"mu_sigma_squared", values},
                     {"fraction_above_landweber_small_half", fraction_above_in_small_half(values, landweber_factors)}};
  }
  j["rd_factors"] = factors;
  nlohmann::json methods_json = nlohmann::json::object();
  for (const auto& m : methods) {
    nlohmann::json mj;
    mj["best_rel_error"] = m.best_rel_error;
    mj["best_k"] = m.best_k;
    mj["morozov_rel_error"] = m.morozov_rel_error ? nlohmann::json(*m.morozov_rel_error) : nlohmann::json(nullptr);
    mj["morozov_k"] = m.morozov_k ? nlohmann::json(*m.morozov_k) : nlohmann::json(nullptr);
    mj["iterations"] = m.trace.iterations;
    mj["total_applies"] = m.trace.total_applies;
    mj["adjoint_applies"] = m.trace.adjoint_applies;
    methods_json[m.name] = mj;
  }
  j["methods"] = methods_json;
  return j;
}

// ------------------------------------------------------------ commands

namespace {

struct Globals {
  std::uint64_t seed = 7;
  int threads = 0;
  std::string out_dir;
};

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

struct SolveFlags {
  std::string matrix;
  std::string method;
  std::string sampler = "rademacher";
  double tol = 1e-6;
  std::size_t max_iter = 10000;
  std::optional<double> morozov;
  std::optional<double> noise_norm;
  std::optional<double> tau;
  std::string trace;
  std::size_t record_stride = 1;
};

int cmd_solve(const Globals& g, const SolveFlags& f, std::ostream& out) {
  set_threads(g.threads);
  const auto method = parse_method(f.method);
  if (!method) throw Error(ErrorCode::InvalidArgument, "unknown method '" + f.method + "'");
  const Problem p = load_problem(f.matrix, g.seed);

  SolveOptions opts;
  opts.seed = g.seed;
  opts.record_stride = f.record_stride;
  if (*method == Method::RandomDescent || *method == Method::Sgdas) opts.sampler = make_sampler(f.sampler, p.op);
  opts.stopping = StoppingRule{RelResidual{f.tol}, MaxIter{f.max_iter}};
  if (f.morozov) {
    double noise = f.noise_norm ? *f.noise_norm : p.noise_norm();
    opts.stopping.any_of.insert(opts.stopping.any_of.begin() + 1, Morozov{*f.morozov, noise});
  }
  opts.stopping.validate();
  if (f.tau) opts.stepsize = FixedStep{*f.tau};

  const SolverTrace t = run_solver(*method, p, opts);
  if (!f.trace.empty()) write_trace_csv(t, fs::path(f.trace));
  if (!g.out_dir.empty()) write_report_json(summary_json(t), out_path(g, "solve.json"));

  out << "problem            " << p.op.rows() << " x " << p.op.cols() << '\n';
  out << "method             " << method_token(t.method);
  if (t.options.sampler) out << " (" << sampler_token(t.options.sampler->kind()) << ")";
  out << '\n';
  if (t.embedded) out << "square embedding   applied (" << std::max(p.op.rows(), p.op.cols()) << " x "
                      << std::max(p.op.rows(), p.op.cols()) << ")\n";
  out << "termination        " << termination_name(t.termination) << " [" << t.detail << "]\n";
  out << "rel residual       " << fmt(t.final_relative_residual()) << '\n';
  out << "||v||              " << fmt(norm2(t.final_iterate)) << '\n';
  out << "iterations         " << t.iterations << '\n';
  out << "operator applies   " << t.total_applies << " (+" << t.adjoint_applies << " adjoint)\n";
  if (t.null_steps > 0) out << "null steps         " << t.null_steps << '\n';
  out << "wall time [s]      " << std::fixed << std::setprecision(3) << static_cast<double>(t.wall_ns) * 1e-9
      << std::defaultfloat << '\n';
  return exit_code_for(t.termination);
}

struct BenchFlags {
  std::size_t m = 300;
  std::size_t d = 1200;
  double density = 0.1;
  double tol = 1e-2;
  std::optional<std::size_t> max_iter;
  std::size_t trials = 1;
  std::string methods = "rd,sgdas,tfqmr,cgs";
  std::string samplers = "rademacher,coordinate,normal,sphere";
  std::string matrix;
};

int cmd_bench(const Globals& g, const BenchFlags& f, std::ostream& out) {
  if (f.trials == 0) throw Error(ErrorCode::InvalidArgument, "--trials must be >= 1");
  struct Row {
    Method method;
    std::string sampler;
  };
  std::vector<Row> rows;
  for (const auto& token : split(f.methods, ',')) {
    const auto method = parse_method(token);
    if (!method) throw Error(ErrorCode::InvalidArgument, "unknown method '" + token + "'");
    if (*method == Method::RandomDescent || *method == Method::Sgdas) {
      for (const auto& s : split(f.samplers, ',')) {
        if (!parse_sampler(s)) throw Error(ErrorCode::InvalidArgument, "unknown sampler '" + s + "'");
        rows.push_back({*method, s});
      }
    } else {
      rows.push_back({*method, "-"});
    }
  }

  // SuiteSparse mode takes A from the file and defaults to 10·max(m, d) iterations.
  std::optional<Problem> file_problem;
  if (!f.matrix.empty()) file_problem = load_problem(f.matrix, g.seed);
  const std::size_t m = file_problem ? file_problem->op.rows() : f.m;
  const std::size_t d = file_problem ? file_problem->op.cols() : f.d;
  const std::size_t budget = f.max_iter ? *f.max_iter : (file_problem ? 10 * std::max(m, d) : 10000);

  const std::size_t n_rows = rows.size();
  std::vector<SolverTrace> traces(n_rows * f.trials);
  std::vector<std::string> errors(n_rows * f.trials);
  const int threads = g.threads > 0 ? g.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t t = 0; t < f.trials; ++t) {
    try {
      Problem p = file_problem ? Problem{file_problem->op, {}, standard_normal(d, g.seed + t, 3), std::nullopt}
                               : generate_problem(ProblemGenSpec{m, d, f.density, mix64(g.seed) + t, std::nullopt});
      if (file_problem) p.rhs = p.op.apply(*p.ground_truth);
      for (std::size_t r = 0; r < n_rows; ++r) {
        SolveOptions opts;
        opts.seed = g.seed;
        opts.stream = t * n_rows + r;
        opts.record_stride = budget;
        opts.stopping = StoppingRule{RelResidual{f.tol}, MaxIter{budget}};
        if (rows[r].sampler != "-") opts.sampler = make_sampler(rows[r].sampler, p.op);
        traces[t * n_rows + r] = run_solver(rows[r].method, p, opts);
      }
    } catch (const std::exception& e) {
      errors[t * n_rows] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(ErrorCode::InvalidArgument, e);
  }

  nlohmann::json report;
  report["m"] = m;
  report["d"] = d;
  report["density"] = file_problem ? nlohmann::json(nullptr) : nlohmann::json(f.density);
  report["matrix"] = f.matrix.empty() ? nlohmann::json(nullptr) : nlohmann::json(f.matrix);
  report["tol"] = f.tol;
  report["max_iter"] = budget;
  report["trials"] = f.trials;
  report["seed"] = g.seed;
  nlohmann::json rows_json = nlohmann::json::array();

  out << "problem " << m << " x " << d << ", tol " << fmt(f.tol, 1) << ", max iter " << budget << ", trials "
      << f.trials << '\n';
  out << std::left << std::setw(10) << "method" << std::setw(12) << "sampler" << std::setw(24) << "rel residual"
      << std::setw(12) << "||v||" << std::setw(12) << "time [s]" << std::setw(12) << "iters" << "converged\n";
  for (std::size_t r = 0; r < n_rows; ++r) {
    std::vector<double> rel, vnorm, secs, iters;
    std::size_t converged = 0;
    bool embedded = false;
    for (std::size_t t = 0; t < f.trials; ++t) {
      const SolverTrace& tr = traces[t * n_rows + r];
      rel.push_back(tr.final_relative_residual());
      vnorm.push_back(norm2(tr.final_iterate));
      secs.push_back(static_cast<double>(tr.wall_ns) * 1e-9);
      iters.push_back(static_cast<double>(tr.iterations));
      converged += tr.termination == Termination::Converged ? 1 : 0;
      embedded = embedded || tr.embedded;
    }
    const MeanStd rel_s = mean_std(rel), v_s = mean_std(vnorm), t_s = mean_std(secs), it_s = mean_std(iters);
    std::ostringstream relcol;
    relcol << fmt(rel_s.mean, 2);
    if (f.trials > 1) relcol << " +- " << fmt(rel_s.std, 1);
    out << std::left << std::setw(10) << method_token(rows[r].method) << std::setw(12) << rows[r].sampler
        << std::setw(24) << relcol.str() << std::setw(12) << fmt(v_s.mean, 2) << std::setw(12) << fmt(t_s.mean, 2)
        << std::setw(12) << static_cast<std::size_t>(it_s.mean) << converged << '/' << f.trials
        << (embedded ? " (embedded)" : "") << '\n';
    rows_json.push_back({{"method", method_token(rows[r].method)},
                         {"sampler", rows[r].sampler},
                         {"rel_residual_mean", rel_s.mean},
                         {"rel_residual_std", rel_s.std},
                         {"solution_norm_mean", v_s.mean},
                         {"solution_norm_std", v_s.std},
                         {"time_s_mean", t_s.mean},
                         {"time_s_std", t_s.std},
                         {"iterations_mean", it_s.mean},
                         {"converged", converged},
                         {"embedded", embedded}});
  }
  report["rows"] = rows_json;
  if (!g.out_dir.empty()) write_report_json(report, out_path(g, "bench.json"));
  return kExitConverged;
}

struct IllposedFlags {
  IllposedConfig cfg;
  std::string methods;
  std::size_t csv_stride = 10;
};

int cmd_illposed(const Globals& g, IllposedFlags& f, std::ostream& out) {
  f.cfg.seed = g.seed;
  f.cfg.threads = g.threads;
  if (!f.methods.empty()) f.cfg.methods = split(f.methods, ',');
  if (f.csv_stride == 0) throw Error(ErrorCode::InvalidArgument, "--csv-stride must be >= 1");
  const IllposedResult res = run_illposed(f.cfg);
  nlohmann::json report = res.to_json();
  report["noise_level"] = f.cfg.noise;
  report["morozov_factor"] = f.cfg.morozov;
  report["max_iter"] = f.cfg.max_iter;
  report["m_samples"] = f.cfg.m_samples;
  report["seed"] = f.cfg.seed;
  report["solution_seed"] = f.cfg.solution_seed;

  out << "inverse integration d=" << f.cfg.d << ", noise " << fmt(f.cfg.noise, 2) << ", ||noise|| "
      << fmt(res.noise_norm, 3) << ", rough energy in small-sigma half " << std::fixed << std::setprecision(3)
      << res.small_sigma_energy_fraction << std::defaultfloat << '\n';
  out << std::left << std::setw(16) << "method" << std::setw(14) << "best error" << std::setw(10) << "at k"
      << std::setw(16) << "Morozov error" << "at k\n";
  for (const auto& m : res.methods) {
    out << std::left << std::setw(16) << m.name << std::setw(14) << fmt(m.best_rel_error, 3) << std::setw(10)
        << m.best_k << std::setw(16) << (m.morozov_rel_error ? fmt(*m.morozov_rel_error, 3) : std::string("-"))
        << (m.morozov_k ? std::to_string(*m.morozov_k) : std::string("-")) << '\n';
  }
  for (const auto& [name, factors] : res.rd_factors) {
    out << "mu_i sigma_i^2 > sigma_i^2/||A||^2 on small-sigma half (" << name << "): " << std::fixed
        << std::setprecision(2) << 100.0 * fraction_above_in_small_half(factors, res.landweber_factors) << "%"
        << std::defaultfloat << '\n';
  }

  if (!g.out_dir.empty()) {
    write_report_json(report, out_path(g, "illposed.json"));
    for (const auto& m : res.methods) {
      SolverTrace thin = m.trace;
      thin.records.clear();
      for (const auto& rec : m.trace.records) {
        if (rec.k % f.csv_stride == 0 || rec.k == m.best_k || (m.morozov_k && rec.k == *m.morozov_k) ||
            rec.k == m.trace.iterations) {
          thin.records.push_back(rec);
        }
      }
      write_trace_csv(thin, out_path(g, "trace_" + m.name + ".csv"));
    }
  } else {
    out << report.dump(2) << '\n';
  }
  return kExitConverged;
}

struct AnalyzeFlags {
  std::string matrix;
  std::string sampler = "normal";
  std::size_t samples = 100000;
  std::optional<double> tau;
};

int cmd_analyze(const Globals& g, const AnalyzeFlags& f, std::ostream& out) {
  set_threads(g.threads);
  const Problem p = load_problem(f.matrix, g.seed);
  const LinearOperator& op = p.op;
  const SamplerSpec spec = make_sampler(f.sampler, op);
  const std::size_t m = op.rows();
  const std::size_t d = op.cols();
  const DenseMatrix a = materialize(op);
  const SpectralData sp = svd_small_dense(a);

  nlohmann::json report;
  report["m"] = m;
  report["d"] = d;
  report["rank"] = sp.rank;
  report["sampler"] = sampler_token(spec.kind());
  report["samples"] = f.samples;
  report["singular_values"] = sp.singular_values;

  RngState rng(g.seed, 0);
  nlohmann::json mj;
  std::optional<double> m_min;
  std::optional<double> range_min;
  try {
    const MEstimate est = estimate_M(op, spec, rng, f.samples);
    const SymmetricEigen eig = symmetric_eigen(est.matrix);
    m_min = eig.values.back();
    mj["eigenvalues"] = eig.values;
    mj["projected_mu"] = projected_mu(est.matrix, sp);
    mj["n_null_directions"] = est.n_null_directions;
    mj["null_fraction"] = static_cast<double>(est.n_null_directions) / static_cast<double>(est.n_samples);
    mj["diverged"] = est.diverged;
    mj["block_ratio"] = est.block_ratio;
    mj["max_share"] = est.max_share;
    if (m <= d) {
      const DenseMatrix ama = multiply(multiply(a, est.matrix), a.transposed());
      range_min = symmetric_eigen(ama).values.back();
      mj["lambda_min_AMAt"] = *range_min;
    }
    if (est.diverged) m_min.reset();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AllDirectionsNull) throw;
    mj["error"] = e.what();
    mj["diverged"] = true;
  }
  report["M_estimate"] = mj;

  nlohmann::json brackets;
  const bool full = sp.full_column_rank() && m >= d;
  if (full && spec.isotropic()) {
    brackets["general"] = {{"lower", 1.0 / (static_cast<double>(d) * sp.sigma_max() * sp.sigma_max())},
                           {"upper", 1.0 / (static_cast<double>(d) * sp.sigma_min() * sp.sigma_min())}};
  }
  if ((spec.kind() == SamplerKind::NormalStd || spec.kind() == SamplerKind::SphereSqrtD) && full && m > d && d > 2) {
    brackets["gaussian"] = to_json(normal_M_eigen_bounds(sp.singular_values, d));
  }
  const Vector norms = column_norms(op);
  if (spec.kind() == SamplerKind::Coordinate || spec.kind() == SamplerKind::WeightedCoordinate) {
    try {
      const DenseMatrix exact = spec.kind() == SamplerKind::Coordinate ? coordinate_M_exact(norms)
                                                                         : weighted_coordinate_M_exact(norms, spec.weights());
      Vector diag(d);
      for (std::size_t j = 0; j < d; ++j) diag[j] = exact(j, j);
      brackets["coordinate_exact"] = diag;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroColumn) throw;
      brackets["coordinate_exact"] = e.what();
    }
  }
  report["brackets"] = brackets;

  if (spec.kind() != SamplerKind::WeightedCoordinate && sp.rank > 0) {
    const double c = c_constant(spec);
    const double tau = f.tau ? *f.tau : 1.0 / (c * sp.sigma_max() * sp.sigma_max());
    report["rates"] = to_json(rate_bounds(sp, m_min, c, tau, range_min));
  } else {
    nlohmann::json rd;
    if (m_min && *m_min > 0.0 && sp.rank > 0) rd["rd_bound"] = 1.0 - *m_min * sp.sigma_min() * sp.sigma_min();
    rd["note"] = "sampler is not isotropic: SGDAS constants omitted";
    report["rates"] = rd;
  }

  if (!g.out_dir.empty()) write_report_json(report, out_path(g, "analyze.json"));
  out << report.dump(2) << '\n';
  return kExitConverged;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adjoint-free randomized least-squares solvers"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
  app.add_option("--out-dir", g.out_dir, "Directory for JSON reports and traces");

  SolveFlags sf;
  auto* solve = app.add_subcommand("solve", "Run one solver on one problem");
  solve->add_option("--matrix", sf.matrix, "MatrixMarket path, gen:m=..,d=..,density=..,seed=.. or cumsum:d=..")
      ->required();
  solve->add_option("--method", sf.method, "rd | sgdas | landweber | tfqmr | cgs")->required();
  solve->add_option("--sampler", sf.sampler, "rademacher | coordinate | weighted | normal | sphere")
      ->capture_default_str();
  solve->add_option("--tol", sf.tol, "Relative residual tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  solve->add_option("--max-iter", sf.max_iter, "Iteration budget")->capture_default_str();
  auto* morozov = solve->add_option("--morozov", sf.morozov, "Discrepancy factor (>= 1)");
  solve->add_option("--noise-norm", sf.noise_norm, "Noise norm for the discrepancy principle")->needs(morozov);
  solve->add_option("--tau", sf.tau, "Fixed stepsize (sgdas, landweber)")->check(CLI::PositiveNumber);
  solve->add_option("--trace", sf.trace, "Trace CSV output path");
  solve->add_option("--record-stride", sf.record_stride, "Record every n-th iteration")->check(CLI::PositiveNumber);

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "Compare solvers over repeated trials");
  bench->add_option("--m", bf.m)->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--d", bf.d)->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--density", bf.density)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  bench->add_option("--tol", bf.tol)->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--max-iter", bf.max_iter, "Default 10000, or 10*max(m,d) with --matrix");
  bench->add_option("--trials", bf.trials)->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--methods", bf.methods)->capture_default_str();
  bench->add_option("--samplers", bf.samplers)->capture_default_str();
  bench->add_option("--matrix", bf.matrix, "MatrixMarket file instead of generated problems");

  IllposedFlags itf;
  auto* illposed = app.add_subcommand("illposed", "Inverse-integration semiconvergence study");
  illposed->add_option("--d", itf.cfg.d)->check(CLI::Range(2, 2000))->capture_default_str();
  illposed->add_option("--noise", itf.cfg.noise, "Relative noise level ||r||/||Av||")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  illposed->add_option("--morozov", itf.cfg.morozov)->check(CLI::Range(1.0, 1e6))->capture_default_str();
  illposed->add_option("--methods", itf.methods, "landweber,rd-normal,rd-sphere,rd-rademacher,rd-coordinate");
  illposed->add_option("--max-iter", itf.cfg.max_iter)->capture_default_str();
  illposed->add_option("--samples", itf.cfg.m_samples, "Draws for the M estimate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  illposed->add_option("--solution-seed", itf.cfg.solution_seed)->capture_default_str();
  illposed->add_option("--csv-stride", itf.csv_stride, "Keep every n-th record in trace CSVs")->capture_default_str();

  AnalyzeFlags af;
  auto* analyze = app.add_subcommand("analyze", "Estimate M and report rate constants");
  analyze->add_option("--matrix", af.matrix)->required();
  analyze->add_option("--sampler", af.sampler)->capture_default_str();
  analyze->add_option("--samples", af.samples)->check(CLI::PositiveNumber)->capture_default_str();
  analyze->add_option("--tau", af.tau, "SGDAS stepsize for the rate report (default 1/(c||A||^2))");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*solve) return cmd_solve(g, sf, out);
    if (*bench) return cmd_bench(g, bf, out);
    if (*illposed) return cmd_illposed(g, itf, out);
    if (*analyze) return cmd_analyze(g, af, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::IoError:
      case ErrorCode::ParseError:
      case ErrorCode::UnsupportedFormat:
        return kExitFile;
      default:
        return kExitUsage;
    }
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitFile;
  }
  return kExitUsage;
}

}  // namespace adjfree::cli
