#include <cmath>
#include <limits>
#include <sstream>

#include "adjfree/errors.hpp"
#include "adjfree/solvers.hpp"

namespace adjfree {

StoppingRule::StoppingRule(std::initializer_list<StopCriterion> criteria) : any_of(criteria) { validate(); }

void StoppingRule::validate() const {
  for (const auto& c : any_of) {
    if (const auto* rel = std::get_if<RelResidual>(&c); rel && !(rel->tol > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "relative tolerance must be positive");
    }
    if (const auto* mz = std::get_if<Morozov>(&c)) {
      if (!(mz->factor >= 1.0)) throw Error(ErrorCode::InvalidArgument, "Morozov factor must be >= 1");
      if (!(mz->noise_norm >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise norm must be >= 0");
    }
  }
}

std::string describe(const StopCriterion& criterion) {
  std::ostringstream out;
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, MaxIter>) out << "max_iter(" << c.n << ")";
        else if constexpr (std::is_same_v<T, RelResidual>) out << "rel_residual(" << c.tol << ")";
        else out << "morozov(" << c.factor << "*" << c.noise_norm << ")";
      },
      criterion);
  return out.str();
}

std::optional<std::size_t> first_satisfied(const IterationRecord& record, double rhs_norm,
                                           const StoppingRule& rule) {
  for (std::size_t i = 0; i < rule.any_of.size(); ++i) {
    const bool hit = std::visit(
        [&](const auto& c) {
          using T = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<T, MaxIter>) {
            return record.k >= c.n;
          } else if constexpr (std::is_same_v<T, RelResidual>) {
            return rhs_norm == 0.0 || record.residual_norm / rhs_norm <= c.tol;
          } else {
            return record.residual_norm <= c.factor * c.noise_norm;
          }
        },
        rule.any_of[i]);
    if (hit) return i;
  }
  return std::nullopt;
}

bool check_stop(const IterationRecord& record, double rhs_norm, const StoppingRule& rule) {
  return first_satisfied(record, rhs_norm, rule).has_value();
}

std::optional<Method> parse_method(std::string_view token) {
  if (token == "rd") return Method::RandomDescent;
  if (token == "sgdas") return Method::Sgdas;
  if (token == "landweber") return Method::Landweber;
  if (token == "tfqmr") return Method::Tfqmr;
  if (token == "cgs") return Method::Cgs;
  return std::nullopt;
}

std::string method_token(Method method) {
  switch (method) {
    case Method::RandomDescent: return "rd";
    case Method::Sgdas: return "sgdas";
    case Method::Landweber: return "landweber";
    case Method::Tfqmr: return "tfqmr";
    case Method::Cgs: return "cgs";
  }
  return "unknown";
}

std::string termination_name(Termination termination) {
  switch (termination) {
    case Termination::Converged: return "Converged";
    case Termination::MaxIterReached: return "MaxIterReached";
    case Termination::Breakdown: return "Breakdown";
  }
  return "Unknown";
}

double SolverTrace::final_relative_residual() const {
  if (records.empty()) return std::nan("");
  if (rhs_norm == 0.0) return records.back().residual_norm == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return records.back().residual_norm / rhs_norm;
}

}  // namespace adjfree
