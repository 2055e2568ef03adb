#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "../errors.hpp"

namespace dlsched::lp {

enum class Sense { Maximize, Minimize };
enum class Relation { LessEqual, Equal };
enum class RowKind { Admit, Conservation, Capacity, Other };

/// Identifies a variable by its role. Flow variables use (type, link, age[, slot]);
/// route-schedule variables use (type, route[, slot]). Unused fields stay -1.
struct VarKey {
  int type = -1;
  int link = -1;
  int age = -1;
  int slot = -1;
  int route = -1;

  friend auto operator<=>(const VarKey&, const VarKey&) = default;
};

struct Term {
  std::size_t var;
  double coef;
};

struct Row {
  std::vector<Term> terms;
  Relation rel = Relation::LessEqual;
  double bound = 0.0;
  RowKind kind = RowKind::Other;
  /// Real link id for capacity rows, -1 otherwise.
  int link = -1;
  int slot = -1;
};

/// All variables are nonnegative.
class LpProblem {
 public:
  Sense sense = Sense::Maximize;

  std::size_t add_variable(const VarKey& key, double objective = 0.0) {
    auto [it, inserted] = index_.try_emplace(key, keys_.size());
    if (!inserted) throw Error("duplicate LP variable");
    keys_.push_back(key);
    objective_.push_back(objective);
    return it->second;
  }

  std::optional<std::size_t> find(const VarKey& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  void add_objective(std::size_t var, double coef) { objective_.at(var) += coef; }

  std::size_t add_row(Row row) {
    rows_.push_back(std::move(row));
    return rows_.size() - 1;
  }

  std::size_t num_vars() const noexcept { return keys_.size(); }
  std::size_t num_rows() const noexcept { return rows_.size(); }
  const std::vector<double>& objective() const noexcept { return objective_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }
  std::vector<Row>& rows() noexcept { return rows_; }
  const std::vector<VarKey>& keys() const noexcept { return keys_; }
  const VarKey& key(std::size_t var) const { return keys_.at(var); }

  double evaluate_objective(const std::vector<double>& x) const {
    double v = 0.0;
    for (std::size_t i = 0; i < objective_.size(); ++i) v += objective_[i] * x[i];
    return v;
  }

  /// Largest violation over rows and nonnegativity.
  double max_violation(const std::vector<double>& x) const {
    double worst = 0.0;
    for (double v : x) worst = std::max(worst, -v);
    for (const auto& r : rows_) {
      double lhs = 0.0;
      for (const auto& t : r.terms) lhs += t.coef * x[t.var];
      const double gap = lhs - r.bound;
      worst = std::max(worst, r.rel == Relation::Equal ? std::abs(gap) : gap);
    }
    return worst;
  }

 private:
  std::vector<VarKey> keys_;
  std::vector<double> objective_;
  std::vector<Row> rows_;
  std::map<VarKey, std::size_t> index_;
};

struct LpSolution {
  std::vector<double> values;
  double objective = 0.0;
  int iterations = 0;
};

inline constexpr double kResidualTol = 1e-8;
inline constexpr double kObjectiveRelTol = 1e-6;
inline constexpr double kClipTol = 1e-10;

/// Multiply every capacity bound by eta; nothing else changes.
inline LpProblem shrink_capacities(LpProblem problem, double eta) {
  if (!(eta > 0.0)) throw InvalidEta("capacity shrink factor must be positive, got " + std::to_string(eta));
  for (auto& r : problem.rows())
    if (r.kind == RowKind::Capacity) r.bound *= eta;
  return problem;
}

}  // namespace dlsched::lp
