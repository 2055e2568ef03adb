#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "../net_model.hpp"
#include "problem.hpp"
#include "solver.hpp"
#include "tables.hpp"

namespace dlsched {

/// rates[t][j]: expected arrivals of type j in slot t.
using RateTable = std::vector<std::vector<double>>;

inline RateTable stationary_rate_table(const std::vector<double>& rates, std::size_t horizon) {
  return RateTable(horizon, rates);
}

namespace lp {
namespace detail {

/// Effective capacity of a real link: C * p / (1 + eps).
inline double capacity_bound(const SelfLoopView& view, LinkId id, double epsilon) {
  const auto& e = view.edge(id);
  return e.capacity.value() * e.reliability / (1.0 + epsilon);
}

/// Adds the flow variables of one cohort (type j arriving in `slot`, -1 when
/// stationary) restricted to arcs on some valid walk, plus its admit and
/// conservation rows. Returns var ids indexed [tau * |L̄| + link], or -1.
inline std::vector<long> add_flow_block(LpProblem& p, const SelfLoopView& view, const TimeLayers& layers,
                                        const PacketTypeSpec& ty, std::size_t j, int slot, double reward) {
  const auto nl = view.num_links();
  const int d = ty.deadline;
  std::vector<long> var((static_cast<std::size_t>(d) + 1) * nl, -1);
  for (int tau = 0; tau <= d; ++tau)
    for (LinkId id = 0; id < nl; ++id) {
      if (!layers.arc_alive(view, static_cast<std::size_t>(tau), id)) continue;
      const double obj = tau == 0 ? reward : 0.0;
      var[static_cast<std::size_t>(tau) * nl + id] = static_cast<long>(
          p.add_variable({static_cast<int>(j), static_cast<int>(id), tau, slot, -1}, obj));
    }

  Row admit{{}, Relation::LessEqual, 1.0, RowKind::Admit, -1, slot};
  for (auto id : view.out(ty.source))
    if (var[id] >= 0) admit.terms.push_back({static_cast<std::size_t>(var[id]), 1.0});
  if (!admit.terms.empty()) p.add_row(std::move(admit));

  for (int tau = 1; tau <= d; ++tau)
    for (NodeId v = 0; v < view.num_nodes(); ++v) {
      if (!layers.alive(static_cast<std::size_t>(tau), v)) continue;
      Row r{{}, Relation::Equal, 0.0, RowKind::Conservation, -1, slot};
      for (auto id : view.in(v)) {
        const auto x = var[static_cast<std::size_t>(tau - 1) * nl + id];
        if (x >= 0) r.terms.push_back({static_cast<std::size_t>(x), 1.0});
      }
      for (auto id : view.out(v)) {
        const auto x = var[static_cast<std::size_t>(tau) * nl + id];
        if (x >= 0) r.terms.push_back({static_cast<std::size_t>(x), -1.0});
      }
      if (!r.terms.empty()) p.add_row(std::move(r));
    }
  return var;
}

inline void add_capacity_rows(LpProblem& p, const SelfLoopView& view, std::vector<std::vector<Term>>& buckets,
                              std::size_t slots, double bound_scale_eps) {
  const auto nr = view.num_real_links();
  for (std::size_t t = 0; t < slots; ++t)
    for (LinkId id = 0; id < nr; ++id) {
      auto& terms = buckets[t * nr + id];
      if (terms.empty()) continue;
      p.add_row({std::move(terms), Relation::LessEqual, capacity_bound(view, id, bound_scale_eps), RowKind::Capacity,
                 static_cast<int>(id), slots == 1 ? -1 : static_cast<int>(t)});
    }
}

}  // namespace detail

/// Stationary flow program: maximize expected weighted admitted traffic
/// subject to conservation and capacities shrunk by (1 + eps).
inline LpProblem build_fs(const SelfLoopView& view, const std::vector<PacketTypeSpec>& types,
                          const std::vector<double>& rates, double epsilon) {
  if (rates.size() != types.size()) throw ConfigMismatch("rate vector length differs from type count");
  if (epsilon < 0.0) throw ConfigError("epsilon must be nonnegative");
  LpProblem p;
  const auto nl = view.num_links();
  const auto nr = view.num_real_links();
  std::vector<std::vector<Term>> buckets(nr);
  for (std::size_t j = 0; j < types.size(); ++j) {
    if (!(rates[j] > 0.0)) continue;
    const auto& ty = types[j];
    const TimeLayers layers(view, ty);
    const auto var = detail::add_flow_block(p, view, layers, ty, j, -1, ty.weight * rates[j]);
    for (int tau = 0; tau <= ty.deadline; ++tau)
      for (LinkId id = 0; id < nr; ++id) {
        const auto x = var[static_cast<std::size_t>(tau) * nl + id];
        if (x >= 0) buckets[id].push_back({static_cast<std::size_t>(x), rates[j]});
      }
  }
  detail::add_capacity_rows(p, view, buckets, 1, epsilon);
  return p;
}

/// Time-indexed flow program over arrival slots [0, T); capacity rows cover
/// slots [0, T + d_max).
inline LpProblem build_fns(const SelfLoopView& view, const std::vector<PacketTypeSpec>& types, const RateTable& rates,
                           std::size_t horizon, double epsilon) {
  if (rates.size() < horizon) throw ConfigMismatch("rate table shorter than the horizon");
  LpProblem p;
  const auto nl = view.num_links();
  const auto nr = view.num_real_links();
  const auto dmax = static_cast<std::size_t>(max_deadline(types));
  const auto slots = horizon + dmax;
  std::vector<std::vector<Term>> buckets(slots * nr);
  std::vector<TimeLayers> layers;
  for (const auto& ty : types) layers.emplace_back(view, ty);
  for (std::size_t t = 0; t < horizon; ++t) {
    if (rates[t].size() != types.size()) throw ConfigMismatch("rate table row length differs from type count");
    for (std::size_t j = 0; j < types.size(); ++j) {
      const double lam = rates[t][j];
      if (!(lam > 0.0)) continue;
      const auto& ty = types[j];
      const auto var =
          detail::add_flow_block(p, view, layers[j], ty, j, static_cast<int>(t), ty.weight * lam);
      for (int tau = 0; tau <= ty.deadline; ++tau)
        for (LinkId id = 0; id < nr; ++id) {
          const auto x = var[static_cast<std::size_t>(tau) * nl + id];
          if (x >= 0) buckets[(t + static_cast<std::size_t>(tau)) * nr + id].push_back({static_cast<std::size_t>(x), lam});
        }
    }
  }
  detail::add_capacity_rows(p, view, buckets, slots, epsilon);
  return p;
}

/// Periodic flow program over one period; capacity rows wrap (t - tau) mod period.
inline LpProblem build_fnsp(const SelfLoopView& view, const std::vector<PacketTypeSpec>& types, const RateTable& rates,
                            std::size_t period, double epsilon) {
  if (period < 1) throw ConfigError("period must be at least 1");
  if (rates.size() < period) throw ConfigMismatch("rate table shorter than the period");
  LpProblem p;
  const auto nl = view.num_links();
  const auto nr = view.num_real_links();
  std::vector<std::vector<Term>> buckets(period * nr);
  std::vector<TimeLayers> layers;
  for (const auto& ty : types) layers.emplace_back(view, ty);
  for (std::size_t t = 0; t < period; ++t) {
    if (rates[t].size() != types.size()) throw ConfigMismatch("rate table row length differs from type count");
    for (std::size_t j = 0; j < types.size(); ++j) {
      const double lam = rates[t][j];
      if (!(lam > 0.0)) continue;
      const auto& ty = types[j];
      const auto var =
          detail::add_flow_block(p, view, layers[j], ty, j, static_cast<int>(t), ty.weight * lam);
      for (int tau = 0; tau <= ty.deadline; ++tau)
        for (LinkId id = 0; id < nr; ++id) {
          const auto x = var[static_cast<std::size_t>(tau) * nl + id];
          if (x >= 0)
            buckets[((t + static_cast<std::size_t>(tau)) % period) * nr + id].push_back(
                {static_cast<std::size_t>(x), lam});
        }
    }
  }
  detail::add_capacity_rows(p, view, buckets, period, epsilon);
  return p;
}

/// Route-schedule program with time-indexed variables x_{jk}^t and
/// windowed capacities that hold in expectation (no shrink).
inline LpProblem build_ei(const SelfLoopView& view, const std::vector<PacketTypeSpec>& types, const RateTable& rates,
                          std::size_t horizon, std::size_t enumeration_cap = 100000) {
  if (rates.size() < horizon) throw ConfigMismatch("rate table shorter than the horizon");
  LpProblem p;
  const auto nr = view.num_real_links();
  const auto slots = horizon + static_cast<std::size_t>(max_deadline(types));
  std::vector<std::vector<Term>> buckets(slots * nr);
  for (std::size_t j = 0; j < types.size(); ++j) {
    const auto routes = enumerate_route_schedules(j, types[j], view, enumeration_cap);
    for (std::size_t t = 0; t < horizon; ++t) {
      const double lam = rates[t].at(j);
      if (!(lam > 0.0) || routes.empty()) continue;
      Row admit{{}, Relation::LessEqual, 1.0, RowKind::Admit, -1, static_cast<int>(t)};
      for (std::size_t k = 0; k < routes.size(); ++k) {
        const auto x = p.add_variable({static_cast<int>(j), -1, -1, static_cast<int>(t), static_cast<int>(k)},
                                      types[j].weight * lam);
        admit.terms.push_back({x, 1.0});
        for (std::size_t tau = 0; tau < routes[k].links.size(); ++tau) {
          const auto id = routes[k].links[tau];
          if (view.is_loop(id)) continue;
          buckets[(t + tau) * nr + id].push_back({x, lam});
        }
      }
      p.add_row(std::move(admit));
    }
  }
  for (std::size_t t = 0; t < slots; ++t)
    for (LinkId id = 0; id < nr; ++id) {
      auto& terms = buckets[t * nr + id];
      if (terms.empty()) continue;
      p.add_row({std::move(terms), Relation::LessEqual, detail::capacity_bound(view, id, 0.0), RowKind::Capacity,
                 static_cast<int>(id), static_cast<int>(t)});
    }
  return p;
}

/// Stationary route-schedule program; small-instance cross-check of build_fs.
inline LpProblem build_es(const SelfLoopView& view, const std::vector<PacketTypeSpec>& types,
                          const std::vector<double>& rates, double epsilon = 0.0,
                          std::size_t enumeration_cap = 100000) {
  LpProblem p;
  const auto nr = view.num_real_links();
  std::vector<std::vector<Term>> buckets(nr);
  for (std::size_t j = 0; j < types.size(); ++j) {
    if (!(rates[j] > 0.0)) continue;
    const auto routes = enumerate_route_schedules(j, types[j], view, enumeration_cap);
    if (routes.empty()) continue;
    Row admit{{}, Relation::LessEqual, 1.0, RowKind::Admit};
    for (std::size_t k = 0; k < routes.size(); ++k) {
      const auto x = p.add_variable({static_cast<int>(j), -1, -1, -1, static_cast<int>(k)}, types[j].weight * rates[j]);
      admit.terms.push_back({x, 1.0});
      for (auto id : routes[k].links)
        if (!view.is_loop(id)) buckets[id].push_back({x, rates[j]});
    }
    p.add_row(std::move(admit));
  }
  detail::add_capacity_rows(p, view, buckets, 1, epsilon);
  return p;
}

/// Scatter a flow-program solution into a stationary table.
inline ForwardingTable table_from_solution(const LpProblem& p, const LpSolution& sol, const SelfLoopView& view,
                                           const std::vector<PacketTypeSpec>& types) {
  ForwardingTable table(view.num_links(), types);
  for (std::size_t i = 0; i < p.num_vars(); ++i) {
    const auto& k = p.key(i);
    table.at(static_cast<std::size_t>(k.type), static_cast<LinkId>(k.link), k.age) = sol.values[i];
  }
  table.objective = sol.objective;
  return table;
}

inline TimeVaryingForwardingTable tv_table_from_solution(const LpProblem& p, const LpSolution& sol,
                                                         const SelfLoopView& view,
                                                         const std::vector<PacketTypeSpec>& types, std::size_t slots,
                                                         bool periodic) {
  TimeVaryingForwardingTable tv;
  tv.periodic = periodic;
  tv.slices.assign(slots, ForwardingTable(view.num_links(), types));
  for (std::size_t i = 0; i < p.num_vars(); ++i) {
    const auto& k = p.key(i);
    tv.slices[static_cast<std::size_t>(k.slot)].at(static_cast<std::size_t>(k.type), static_cast<LinkId>(k.link),
                                                   k.age) = sol.values[i];
  }
  tv.objective = sol.objective;
  return tv;
}

/// Build, shrink, solve and verify the stationary program.
inline ForwardingTable solve_fs(const SelfLoopView& view, const std::vector<PacketTypeSpec>& types,
                                const std::vector<double>& rates, double epsilon, double eta = 1.0,
                                Backend backend = Backend::InteriorPoint) {
  auto problem = build_fs(view, types, rates, epsilon);
  if (eta != 1.0) problem = shrink_capacities(std::move(problem), eta);
  const auto sol = solve(problem, backend);
  auto table = table_from_solution(problem, sol, view, types);
  table.epsilon = epsilon;
  const auto check = check_table(table, view, types, rates, epsilon, eta);
  if (!check.ok()) throw SolverFailure("forwarding table violates its invariants by " + std::to_string(check.worst()));
  return table;
}

/// Time-indexed table check: per-cohort admit/conservation/boundary and
/// per-(link, slot) capacity, with wrap-around when periodic.
inline TableCheck check_tv_table(const TimeVaryingForwardingTable& tv, const SelfLoopView& view,
                                 const std::vector<PacketTypeSpec>& types, const RateTable& rates, double epsilon) {
  TableCheck c;
  const auto n = tv.num_slots();
  const auto nr = view.num_real_links();
  const auto dmax = static_cast<std::size_t>(max_deadline(types));
  const auto slots = tv.periodic ? n : n + dmax;
  std::vector<double> load(slots * nr, 0.0);
  const std::vector<double> no_rates(types.size(), 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& slice = tv.slices[t];
    const auto part = check_table(slice, view, types, no_rates, epsilon);
    c.conservation = std::max(c.conservation, part.conservation);
    c.admit_excess = std::max(c.admit_excess, part.admit_excess);
    c.boundary = std::max(c.boundary, part.boundary);
    c.negativity = std::max(c.negativity, part.negativity);
    for (std::size_t j = 0; j < types.size(); ++j)
      for (int tau = 0; tau <= types[j].deadline; ++tau)
        for (LinkId id = 0; id < nr; ++id) {
          const auto s = tv.periodic ? (t + static_cast<std::size_t>(tau)) % n : t + static_cast<std::size_t>(tau);
          load[s * nr + id] += rates[t][j] * slice.at(j, id, tau);
        }
  }
  for (std::size_t s = 0; s < slots; ++s)
    for (LinkId id = 0; id < nr; ++id)
      c.capacity_excess = std::max(c.capacity_excess, load[s * nr + id] - detail::capacity_bound(view, id, epsilon));
  return c;
}

inline TimeVaryingForwardingTable solve_fns(const SelfLoopView& view, const std::vector<PacketTypeSpec>& types,
                                            const RateTable& rates, std::size_t horizon, double epsilon) {
  const auto problem = build_fns(view, types, rates, horizon, epsilon);
  const auto sol = solve(problem);
  auto tv = tv_table_from_solution(problem, sol, view, types, horizon, false);
  tv.epsilon = epsilon;
  const auto check = check_tv_table(tv, view, types, rates, epsilon);
  if (!check.ok()) throw SolverFailure("time-varying table violates its invariants by " + std::to_string(check.worst()));
  return tv;
}

inline TimeVaryingForwardingTable solve_fnsp(const SelfLoopView& view, const std::vector<PacketTypeSpec>& types,
                                             const RateTable& rates, std::size_t period, double epsilon) {
  const auto problem = build_fnsp(view, types, rates, period, epsilon);
  const auto sol = solve(problem);
  auto tv = tv_table_from_solution(problem, sol, view, types, period, true);
  tv.epsilon = epsilon;
  const auto check = check_tv_table(tv, view, types, rates, epsilon);
  if (!check.ok()) throw SolverFailure("periodic table violates its invariants by " + std::to_string(check.worst()));
  return tv;
}

/// T * W / (1 - 2 d_max^2 / T): upper bound on the expected optimum over T
/// slots from the eps = 0 stationary optimum W.
inline double upper_bound_expected_optimal(double w_fs_eps0, long horizon, int d_max) {
  const double t = static_cast<double>(horizon);
  const double dd = 2.0 * static_cast<double>(d_max) * static_cast<double>(d_max);
  if (!(t > dd)) throw HorizonTooShort("horizon " + std::to_string(horizon) + " must exceed 2*d_max^2 = " +
                                       std::to_string(static_cast<long>(dd)));
  return t * w_fs_eps0 / (1.0 - dd / t);
}

}  // namespace lp
}  // namespace dlsched
