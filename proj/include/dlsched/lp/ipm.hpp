#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "problem.hpp"

namespace dlsched::lp {

/// min c'x  s.t.  Ax = b, x >= 0. The first `n_orig` columns are the
/// problem's variables, the rest are slacks of <= rows.
struct StandardForm {
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  std::size_t n_orig = 0;
};

inline StandardForm to_standard_form(const LpProblem& p) {
  const auto n = p.num_vars();
  std::size_t slacks = 0;
  for (const auto& r : p.rows())
    if (r.rel == Relation::LessEqual) ++slacks;
  const auto m = p.num_rows();

  StandardForm sf;
  sf.n_orig = n;
  sf.b.resize(static_cast<Eigen::Index>(m));
  sf.c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n + slacks));
  const double sign = p.sense == Sense::Maximize ? -1.0 : 1.0;
  for (std::size_t i = 0; i < n; ++i) sf.c[static_cast<Eigen::Index>(i)] = sign * p.objective()[i];

  std::vector<Eigen::Triplet<double>> trip;
  std::size_t next_slack = n;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& r = p.rows()[i];
    for (const auto& t : r.terms)
      if (t.coef != 0.0) trip.emplace_back(static_cast<int>(i), static_cast<int>(t.var), t.coef);
    if (r.rel == Relation::LessEqual) trip.emplace_back(static_cast<int>(i), static_cast<int>(next_slack++), 1.0);
    sf.b[static_cast<Eigen::Index>(i)] = r.bound;
  }
  sf.A.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n + slacks));
  sf.A.setFromTriplets(trip.begin(), trip.end());
  sf.A.makeCompressed();
  return sf;
}

struct IpmOptions {
  double tol = 1e-10;
  int max_iter = 200;
};

namespace detail {

inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
  return a;
}

/// Normal-equation solver with a fixed sparsity pattern.
class NormalEquations {
 public:
  explicit NormalEquations(const Eigen::SparseMatrix<double>& A) : A_(A), At_(A.transpose()) {}

  // Regularizes the unit-diagonal scaling of A D A^T, so rows whose diagonal
  // collapses near the optimum are not swamped by rows with huge ones.
  bool factor(const Eigen::VectorXd& d) {
    Eigen::SparseMatrix<double> AD = A_ * d.asDiagonal();
    M_ = AD * At_;
    scale_.resize(M_.rows());
    for (Eigen::Index i = 0; i < M_.rows(); ++i) {
      const double m = M_.coeff(i, i);
      scale_[i] = m > 0.0 && std::isfinite(m) ? 1.0 / std::sqrt(m) : 1.0;
    }
    const Eigen::SparseMatrix<double> base = scale_.asDiagonal() * M_ * scale_.asDiagonal();
    reg_ = 1e-14;
    for (int attempt = 0; attempt < 6; ++attempt) {
      Eigen::SparseMatrix<double> R = base;
      for (Eigen::Index i = 0; i < R.rows(); ++i) R.coeffRef(i, i) += reg_;
      if (!analyzed_ || R.nonZeros() != pattern_nnz_) {
        ldlt_.analyzePattern(R);
        analyzed_ = true;
        pattern_nnz_ = R.nonZeros();
      }
      ldlt_.factorize(R);
      if (ldlt_.info() == Eigen::Success) return true;
      reg_ *= 100.0;
    }
    return false;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    auto apply = [&](const Eigen::VectorXd& r) -> Eigen::VectorXd {
      return scale_.cwiseProduct(ldlt_.solve(scale_.cwiseProduct(r)));
    };
    Eigen::VectorXd y = apply(rhs);
    for (int k = 0; k < 2; ++k) y += apply(rhs - M_ * y);
    return y;
  }

 private:
  const Eigen::SparseMatrix<double>& A_;
  Eigen::SparseMatrix<double> At_;
  Eigen::SparseMatrix<double> M_;
  Eigen::VectorXd scale_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool analyzed_ = false;
  Eigen::Index pattern_nnz_ = 0;
  double reg_ = 0.0;
};

}  // namespace detail

/// Mehrotra predictor-corrector interior point method on the normal equations.
inline LpSolution solve_ipm(const LpProblem& p, const IpmOptions& opt = {}) {
  LpSolution out;
  if (p.num_vars() == 0) return out;

  for (const auto& r : p.rows()) {
    if (!r.terms.empty()) continue;
    const bool ok = r.rel == Relation::Equal ? std::abs(r.bound) <= kResidualTol : r.bound >= -kResidualTol;
    if (!ok) throw SolverFailure("row without variables is infeasible");
  }

  // Rows without terms would make the normal matrix singular; drop them.
  LpProblem trimmed;
  const LpProblem* work = &p;
  bool has_empty = false;
  for (const auto& r : p.rows()) has_empty |= r.terms.empty();
  if (has_empty) {
    trimmed.sense = p.sense;
    for (std::size_t i = 0; i < p.num_vars(); ++i) trimmed.add_variable(p.key(i), p.objective()[i]);
    for (const auto& r : p.rows())
      if (!r.terms.empty()) trimmed.add_row(r);
    work = &trimmed;
  }

  std::vector<char> used(work->num_vars(), 0);
  for (const auto& r : work->rows())
    for (const auto& t : r.terms) used[t.var] = 1;
  const double sign = p.sense == Sense::Maximize ? -1.0 : 1.0;
  for (std::size_t i = 0; i < used.size(); ++i)
    if (!used[i] && sign * work->objective()[i] < 0.0) throw SolverFailure("LP is unbounded (free improving variable)");

  if (work->num_rows() == 0) {
    out.values.assign(p.num_vars(), 0.0);
    return out;
  }

  const StandardForm sf = to_standard_form(*work);
  const auto& A = sf.A;
  const auto& b = sf.b;
  const auto& c = sf.c;
  const Eigen::Index n = A.cols();
  const double nn = static_cast<double>(n);

  detail::NormalEquations ne(A);

  // Starting point.
  if (!ne.factor(Eigen::VectorXd::Ones(n))) throw SolverFailure("normal matrix factorization failed at start");
  Eigen::VectorXd x = A.transpose() * ne.solve(b);
  Eigen::VectorXd y = ne.solve(A * c);
  Eigen::VectorXd s = c - A.transpose() * y;
  x.array() += std::max(-1.5 * x.minCoeff(), 0.0);
  s.array() += std::max(-1.5 * s.minCoeff(), 0.0);
  {
    const double xs = x.dot(s);
    const double dx = 0.5 * xs / std::max(s.sum(), 1e-300);
    const double ds = 0.5 * xs / std::max(x.sum(), 1e-300);
    x.array() += dx;
    s.array() += ds;
  }
  x = x.cwiseMax(1e-4);
  s = s.cwiseMax(1e-4);

  const double bnorm = 1.0 + b.norm();
  const double cnorm = 1.0 + c.norm();
  double pinf = 0, dinf = 0, gap = 0;
  int iter = 0, stalled = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (; iter < opt.max_iter; ++iter) {
    const Eigen::VectorXd rp = b - A * x;
    const Eigen::VectorXd rd = c - A.transpose() * y - s;
    const double mu = x.dot(s) / nn;
    const double pobj = c.dot(x);
    const double dobj = b.dot(y);
    pinf = rp.norm() / bnorm;
    dinf = rd.norm() / cnorm;
    gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
    if (pinf < opt.tol && dinf < opt.tol && gap < opt.tol) {
      converged = true;
      break;
    }
    // Near degenerate optima round-off can hold the gap just above tol.
    stalled = gap < 0.9 * best_gap ? 0 : stalled + 1;
    best_gap = std::min(best_gap, gap);
    if (stalled >= 10 && pinf < kResidualTol && dinf < kResidualTol && gap < kObjectiveRelTol) break;
    if (!std::isfinite(mu) || x.lpNorm<Eigen::Infinity>() > 1e14 || y.lpNorm<Eigen::Infinity>() > 1e14) break;

    const Eigen::VectorXd d = x.cwiseQuotient(s);
    if (!ne.factor(d)) break;

    auto direction = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& dy, Eigen::VectorXd& ds) {
      const Eigen::VectorXd rhs = rp + A * (d.cwiseProduct(rd) - rc.cwiseQuotient(s));
      dy = ne.solve(rhs);
      ds = rd - A.transpose() * dy;
      dx = (rc - x.cwiseProduct(ds)).cwiseQuotient(s);
    };

    Eigen::VectorXd dx, dy, ds;
    const Eigen::VectorXd rc_aff = -x.cwiseProduct(s);
    direction(rc_aff, dx, dy, ds);
    const double ap_aff = detail::max_step(x, dx);
    const double ad_aff = detail::max_step(s, ds);
    const double mu_aff = (x + ap_aff * dx).dot(s + ad_aff * ds) / nn;
    const double sigma = std::pow(mu_aff / mu, 3.0);

    const Eigen::VectorXd rc = rc_aff - dx.cwiseProduct(ds) + Eigen::VectorXd::Constant(n, sigma * mu);
    direction(rc, dx, dy, ds);
    const double ap = std::min(1.0, 0.995 * detail::max_step(x, dx));
    const double ad = std::min(1.0, 0.995 * detail::max_step(s, ds));
    x += ap * dx;
    y += ad * dy;
    s += ad * ds;
    if (ap < 1e-12 && ad < 1e-12) break;
  }
  out.iterations = iter;
  if (!converged && !(pinf < kResidualTol && dinf < kResidualTol && gap < kObjectiveRelTol)) {
    std::ostringstream msg;
    msg << "interior point method did not converge after " << iter << " iterations (primal infeasibility " << pinf
        << ", dual infeasibility " << dinf << ", gap " << gap << ")";
    throw SolverFailure(msg.str());
  }

  // Least-norm correction weighted by x^2 pulls the residual down to round-off
  // while barely moving variables that sit near zero.
  for (int round = 0; round < 3; ++round) {
    const Eigen::VectorXd rp = b - A * x;
    if (rp.lpNorm<Eigen::Infinity>() <= 0.01 * kResidualTol) break;
    const Eigen::VectorXd d = x.cwiseProduct(x);
    if (!ne.factor(d)) break;
    const Eigen::VectorXd dx = d.cwiseProduct(A.transpose() * ne.solve(rp));
    x += std::min(1.0, 0.99 * detail::max_step(x, dx)) * dx;
  }

  out.values.resize(p.num_vars());
  for (std::size_t i = 0; i < p.num_vars(); ++i) out.values[i] = std::max(0.0, x[static_cast<Eigen::Index>(i)]);
  out.objective = p.evaluate_objective(out.values);
  return out;
}

}  // namespace dlsched::lp
