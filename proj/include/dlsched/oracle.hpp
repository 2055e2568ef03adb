#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "net_model.hpp"
#include "traffic.hpp"

namespace dlsched {

inline constexpr std::size_t kOraclePacketLimit = 12;

struct TinyInstance {
  SelfLoopView view;
  std::vector<PacketTypeSpec> types;
  ArrivalMatrix arrivals;
  long horizon = 0;
  std::size_t packet_limit = kOraclePacketLimit;
  std::size_t route_cap = 20000;
};

struct OraclePacket {
  std::size_t type;
  long arrival;
};

struct OracleResult {
  double reward = 0.0;
  std::vector<OraclePacket> packets;
  /// Chosen route-schedule per packet, empty when unscheduled.
  std::vector<std::vector<LinkId>> routes;
  long nodes_explored = 0;
};

namespace detail {

/// Real-link footprint (age, link) of a route-schedule, sorted.
inline std::vector<std::pair<int, LinkId>> footprint(const RouteSchedule& rs, const SelfLoopView& view) {
  std::vector<std::pair<int, LinkId>> fp;
  for (std::size_t tau = 0; tau < rs.links.size(); ++tau)
    if (!view.is_loop(rs.links[tau])) fp.emplace_back(static_cast<int>(tau), rs.links[tau]);
  return fp;
}

/// Route-schedules of a type with duplicate footprints and footprints that
/// contain another route's footprint removed; they can never do better.
inline std::vector<std::pair<RouteSchedule, std::vector<std::pair<int, LinkId>>>> useful_routes(
    std::size_t j, const PacketTypeSpec& type, const SelfLoopView& view, std::size_t cap) {
  const auto all = enumerate_route_schedules(j, type, view, cap);
  std::vector<std::pair<RouteSchedule, std::vector<std::pair<int, LinkId>>>> rs;
  for (const auto& r : all) rs.emplace_back(r, footprint(r, view));
  std::stable_sort(rs.begin(), rs.end(), [](const auto& a, const auto& b) { return a.second.size() < b.second.size(); });
  std::vector<std::pair<RouteSchedule, std::vector<std::pair<int, LinkId>>>> kept;
  for (auto& cand : rs) {
    bool dominated = false;
    for (const auto& k : kept)
      if (std::includes(cand.second.begin(), cand.second.end(), k.second.begin(), k.second.end())) {
        dominated = true;
        break;
      }
    if (!dominated) kept.push_back(std::move(cand));
  }
  return kept;
}

}  // namespace detail

/// Exact optimum of the integer program by depth-first search over route
/// choices with per-(link, slot) capacity bookkeeping and a remaining-weight bound.
inline OracleResult brute_force_optimal(const TinyInstance& inst) {
  OracleResult out;
  for (std::size_t t = 0; t < static_cast<std::size_t>(inst.horizon); ++t)
    for (std::size_t j = 0; j < inst.types.size(); ++j)
      for (int n = 0; n < inst.arrivals.count(t, j); ++n) out.packets.push_back({j, static_cast<long>(t)});
  if (out.packets.size() > inst.packet_limit)
    throw InstanceTooLarge("instance has " + std::to_string(out.packets.size()) + " packets, limit is " +
                           std::to_string(inst.packet_limit));
  std::stable_sort(out.packets.begin(), out.packets.end(), [&](const auto& a, const auto& b) {
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
    return inst.types[a.type].weight > inst.types[b.type].weight;
  });

  std::vector<std::vector<std::pair<RouteSchedule, std::vector<std::pair<int, LinkId>>>>> routes;
  for (std::size_t j = 0; j < inst.types.size(); ++j)
    routes.push_back(detail::useful_routes(j, inst.types[j], inst.view, inst.route_cap));

  const auto np = out.packets.size();
  std::vector<double> suffix(np + 1, 0.0);
  for (std::size_t i = np; i-- > 0;)
    suffix[i] = suffix[i + 1] + (routes[out.packets[i].type].empty() ? 0.0 : inst.types[out.packets[i].type].weight);

  const auto nr = inst.view.num_real_links();
  const long slots = inst.horizon + max_deadline(inst.types) + 1;
  std::vector<int> used(static_cast<std::size_t>(slots) * nr, 0);
  auto U = [&](long slot, LinkId l) -> int& { return used[static_cast<std::size_t>(slot) * nr + l]; };

  std::vector<long> choice(np, -1), best_choice(np, -1);
  double best = -1.0;
  auto dfs = [&](auto&& self, std::size_t i, double value) -> void {
    ++out.nodes_explored;
    if (value + suffix[i] <= best) return;
    if (i == np) {
      best = value;
      best_choice = choice;
      return;
    }
    const auto& pk = out.packets[i];
    const auto& opts = routes[pk.type];
    for (std::size_t k = 0; k < opts.size(); ++k) {
      const auto& fp = opts[k].second;
      bool fits = true;
      for (const auto& [tau, l] : fp)
        if (U(pk.arrival + tau, l) >= inst.view.edge(l).capacity.value()) {
          fits = false;
          break;
        }
      if (!fits) continue;
      for (const auto& [tau, l] : fp) ++U(pk.arrival + tau, l);
      choice[i] = static_cast<long>(k);
      self(self, i + 1, value + inst.types[pk.type].weight);
      for (const auto& [tau, l] : fp) --U(pk.arrival + tau, l);
    }
    choice[i] = -1;
    self(self, i + 1, value);
  };
  dfs(dfs, 0, 0.0);

  out.reward = best;
  out.routes.resize(np);
  for (std::size_t i = 0; i < np; ++i)
    if (best_choice[i] >= 0)
      out.routes[i] = routes[out.packets[i].type][static_cast<std::size_t>(best_choice[i])].first.links;
  return out;
}

/// ceil(2 D ((1 + eps) / eps)^2 ln(L / eps)).
inline long cmin_threshold(double epsilon, double L, double D) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("eps must lie in (0, 1)");
  if (L < 1.0 || D < 1.0) throw ConfigError("L and D must be at least 1");
  const double r = (1.0 + epsilon) / epsilon;
  return static_cast<long>(std::ceil(2.0 * D * r * r * std::log(L / epsilon) - 1e-9));
}

/// ceil(a_max^2 / (2 lambda_min^2 eps0^2) ln(2J / eps)).
inline long sample_requirement(double eps0, double epsilon, double J, double a_max, double lambda_min) {
  if (!(eps0 > 0.0 && epsilon > 0.0 && J > 0.0 && a_max > 0.0 && lambda_min > 0.0))
    throw ConfigError("sample requirement needs positive arguments");
  return static_cast<long>(
      std::ceil(a_max * a_max / (2.0 * lambda_min * lambda_min * eps0 * eps0) * std::log(2.0 * J / epsilon) - 1e-9));
}

struct RatioReport {
  double ratio = 0.0;
  /// achieved > upper: the bound is wrong somewhere; ratio is clipped to 1.
  bool exceeded = false;
};

inline RatioReport approx_ratio(double achieved, double upper) {
  if (!(upper > 0.0)) throw NonpositiveBound("approximation ratio needs a positive upper bound");
  RatioReport r{achieved / upper, false};
  if (r.ratio > 1.0) {
    r.ratio = 1.0;
    r.exceeded = true;
  }
  return r;
}

}  // namespace dlsched
