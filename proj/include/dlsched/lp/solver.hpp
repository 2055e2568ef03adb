#pragma once

#include <sstream>

#include "ipm.hpp"
#include "problem.hpp"
#include "simplex.hpp"

namespace dlsched::lp {

enum class Backend { InteriorPoint, Simplex };

/// Solve and verify the primal residuals; any returned solution satisfies
/// every row within kResidualTol.
/// Largest dense tableau (entries) the IPM may fall back to.
inline constexpr std::size_t kSimplexFallbackEntries = 250'000;

inline LpSolution solve_with_fallback(const LpProblem& problem) {
  try {
    return solve_ipm(problem);
  } catch (const SolverFailure&) {
    // Badly scaled rows (rates many orders above capacities) stall the IPM;
    // small problems still get an exact answer from the tableau.
    const std::size_t m = problem.num_rows();
    if ((m + 1) * (problem.num_vars() + 2 * m + 1) > kSimplexFallbackEntries) throw;
    return solve_simplex(problem);
  }
}

inline LpSolution solve(const LpProblem& problem, Backend backend = Backend::InteriorPoint) {
  LpSolution sol = backend == Backend::Simplex ? solve_simplex(problem) : solve_with_fallback(problem);
  for (auto& v : sol.values)
    if (v < kClipTol) v = std::max(v, 0.0);
  const double worst = problem.max_violation(sol.values);
  if (worst > kResidualTol) {
    std::ostringstream msg;
    msg << "LP solution violates its constraints by " << worst;
    throw SolverFailure(msg.str());
  }
  sol.objective = problem.evaluate_objective(sol.values);
  return sol;
}

}  // namespace dlsched::lp
