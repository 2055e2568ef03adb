#pragma once

#include <cmath>
#include <vector>

#include "problem.hpp"

namespace dlsched::lp {

/// Dense two-phase tableau simplex with Bland's rule. Exact enough for
/// small cross-check problems; far too slow for production sizes.
inline LpSolution solve_simplex(const LpProblem& p, double tol = 1e-11) {
  const std::size_t n = p.num_vars();
  const std::size_t m = p.num_rows();
  std::size_t slacks = 0;
  for (const auto& r : p.rows())
    if (r.rel == Relation::LessEqual) ++slacks;
  const std::size_t cols = n + slacks + m;  // originals, slacks, artificials
  const std::size_t rhs = cols;
  std::vector<std::vector<double>> T(m + 1, std::vector<double>(cols + 1, 0.0));
  std::vector<std::size_t> basis(m);

  std::size_t next_slack = n;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& r = p.rows()[i];
    for (const auto& t : r.terms) T[i][t.var] += t.coef;
    if (r.rel == Relation::LessEqual) T[i][next_slack++] = 1.0;
    T[i][rhs] = r.bound;
    if (T[i][rhs] < 0.0)
      for (auto& v : T[i]) v = -v;
    T[i][n + slacks + i] = 1.0;
    basis[i] = n + slacks + i;
  }

  auto pivot = [&](std::size_t row, std::size_t col) {
    const double pv = T[row][col];
    for (auto& v : T[row]) v /= pv;
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == row || T[i][col] == 0.0) continue;
      const double f = T[i][col];
      for (std::size_t k = 0; k <= cols; ++k) T[i][k] -= f * T[row][k];
    }
    basis[row] = col;
  };

  // Minimizes the objective row; allowed(col) restricts entering columns.
  auto run = [&](auto allowed) {
    for (int guard = 0; guard < 100000; ++guard) {
      std::size_t enter = cols;
      for (std::size_t k = 0; k < cols; ++k)
        if (allowed(k) && T[m][k] < -tol) {
          enter = k;
          break;
        }
      if (enter == cols) return;
      std::size_t leave = m;
      double best = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (T[i][enter] <= tol) continue;
        const double ratio = T[i][rhs] / T[i][enter];
        if (leave == m || ratio < best - tol || (std::abs(ratio - best) <= tol && basis[i] < basis[leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave == m) throw SolverFailure("LP is unbounded");
      pivot(leave, enter);
    }
    throw SolverFailure("simplex iteration limit reached");
  };

  // Phase 1: minimize the sum of artificials.
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k <= cols; ++k)
      if (k < n + slacks || k == rhs) T[m][k] -= T[i][k];
  run([&](std::size_t k) { return k < cols; });
  if (-T[m][rhs] > 1e-8) throw SolverFailure("LP is infeasible");

  // Drive remaining artificials out of the basis where possible.
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < n + slacks) continue;
    for (std::size_t k = 0; k < n + slacks; ++k)
      if (std::abs(T[i][k]) > 1e-9) {
        pivot(i, k);
        break;
      }
  }

  // Phase 2.
  std::fill(T[m].begin(), T[m].end(), 0.0);
  const double sign = p.sense == Sense::Maximize ? -1.0 : 1.0;
  for (std::size_t k = 0; k < n; ++k) T[m][k] = sign * p.objective()[k];
  for (std::size_t i = 0; i < m; ++i) {
    const double f = T[m][basis[i]];
    if (f == 0.0) continue;
    for (std::size_t k = 0; k <= cols; ++k) T[m][k] -= f * T[i][k];
  }
  run([&](std::size_t k) { return k < n + slacks; });

  LpSolution out;
  out.values.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) out.values[basis[i]] = std::max(0.0, T[i][rhs]);
  out.objective = p.evaluate_objective(out.values);
  return out;
}

}  // namespace dlsched::lp
