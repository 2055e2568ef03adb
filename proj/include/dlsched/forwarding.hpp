#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "lp/tables.hpp"
#include "net_model.hpp"
#include "random.hpp"

namespace dlsched {

inline constexpr double kNormalizerFloor = 1e-12;

/// Chance that an arriving packet is attempted at all: sum of f^0 over O(s).
inline double admit_probability(const ForwardingTable& table, const SelfLoopView& view, const PacketTypeSpec& type,
                                std::size_t j) {
  double a = 0.0;
  for (auto id : view.out(type.source)) a += std::max(0.0, table.at(j, id, 0));
  return std::clamp(a, 0.0, 1.0);
}

struct HopDistribution {
  std::vector<std::pair<LinkId, double>> links;
  double drop = 1.0;
  /// Set when the packet sits where the table carries no flow.
  bool off_support = false;
};

/// Next-hop law for a packet of type j at node v and age tau. At age 0 the
/// raw f^0 values are used with the remaining mass as a drop; later ages
/// normalize f^tau over O(v).
inline HopDistribution hop_distribution(const ForwardingTable& table, const SelfLoopView& view,
                                        const PacketTypeSpec& type, std::size_t j, int tau, NodeId v) {
  HopDistribution h;
  if (tau < 0 || tau > type.deadline || (tau == 0 && v != type.source)) {
    h.off_support = true;
    return h;
  }
  double sum = 0.0;
  for (auto id : view.out(v)) {
    const double f = std::max(0.0, table.at(j, id, tau));
    if (f > 0.0) {
      h.links.emplace_back(id, f);
      sum += f;
    }
  }
  if (sum < kNormalizerFloor) {
    h.links.clear();
    h.drop = 1.0;
    h.off_support = tau > 0;
    return h;
  }
  if (tau == 0 && sum <= 1.0) {
    h.drop = 1.0 - sum;
    return h;
  }
  for (auto& [id, p] : h.links) p /= sum;
  h.drop = 0.0;
  return h;
}

/// Draws one outcome; nullopt means drop.
inline std::optional<LinkId> sample_hop(const HopDistribution& h, Rng& rng) {
  if (h.links.empty()) return std::nullopt;
  double u = uniform01(rng);
  for (const auto& [id, p] : h.links) {
    if (u < p) return id;
    u -= p;
  }
  // Remaining mass is the drop; guard against round-off when drop is zero.
  if (h.drop <= 0.0) return h.links.back().first;
  return std::nullopt;
}

/// Layered copy of one type's forwarding values: node (v:tau) for tau in
/// [0, d_j + 1], arc (tail:tau) -> (head:tau+1) per link carrying f^tau.
struct TimeExpandedGraph {
  struct Arc {
    int tau;
    LinkId link;
    NodeId tail;
    NodeId head;
    double value;
  };
  std::size_t layers = 0;
  /// Ordered by (tau, link id).
  std::vector<Arc> arcs;

  TimeExpandedGraph(const ForwardingTable& table, const SelfLoopView& view, const PacketTypeSpec& type, std::size_t j)
      : layers(static_cast<std::size_t>(type.deadline) + 2) {
    for (int tau = 0; tau <= type.deadline; ++tau)
      for (LinkId id = 0; id < view.num_links(); ++id) {
        const auto& e = view.edge(id);
        arcs.push_back({tau, id, e.tail, e.head, table.at(j, id, tau)});
      }
  }
};

struct RouteDistribution {
  std::vector<RouteSchedule> routes;
  std::vector<double> probabilities;
  double drop = 1.0;
};

inline constexpr double kStripStop = 1e-10;
inline constexpr double kNegativeClip = 1e-9;

/// Repeatedly strips the maximum-bottleneck path from (s:0) to (z:d+1);
/// among equal bottlenecks the lexicographically smallest link sequence wins.
inline RouteDistribution decompose(const ForwardingTable& table, const SelfLoopView& view, const PacketTypeSpec& type,
                                   std::size_t j) {
  const auto nl = view.num_links();
  const auto nn = view.num_nodes();
  const int d = type.deadline;
  std::vector<double> r((static_cast<std::size_t>(d) + 1) * nl);
  for (int tau = 0; tau <= d; ++tau)
    for (LinkId id = 0; id < nl; ++id) {
      double v = table.at(j, id, tau);
      if (v < -kNegativeClip) throw ConservationViolated("negative forwarding value " + std::to_string(v));
      r[static_cast<std::size_t>(tau) * nl + id] = std::max(0.0, v);
    }
  auto arc = [&](int tau, LinkId id) -> double& { return r[static_cast<std::size_t>(tau) * nl + id]; };
  auto admit_mass = [&] {
    double a = 0.0;
    for (auto id : view.out(type.source)) a += arc(0, id);
    return a;
  };

  RouteDistribution out;
  double admitted = 0.0;
  // best[tau][v]: largest bottleneck from (v:tau) to (z:d+1).
  std::vector<double> best((static_cast<std::size_t>(d) + 2) * nn);
  auto b = [&](int tau, NodeId v) -> double& { return best[static_cast<std::size_t>(tau) * nn + v]; };
  const auto limit = (static_cast<std::size_t>(d) + 1) * nl;
  while (admit_mass() >= kStripStop) {
    std::fill(best.begin(), best.end(), 0.0);
    b(d + 1, type.destination) = std::numeric_limits<double>::infinity();
    for (int tau = d; tau >= 0; --tau)
      for (LinkId id = 0; id < nl; ++id) {
        const auto& e = view.edge(id);
        const double via = std::min(arc(tau, id), b(tau + 1, e.head));
        if (via > b(tau, e.tail)) b(tau, e.tail) = via;
      }
    const double bottleneck = b(0, type.source);
    if (!(bottleneck > 0.0)) {
      const double left = admit_mass();
      if (left > 1e-8)
        throw ConservationViolated("flow of " + std::to_string(left) + " cannot reach the destination in time");
      break;
    }
    RouteSchedule rs{j, {}};
    NodeId at = type.source;
    for (int tau = 0; tau <= d; ++tau) {
      for (auto id : view.out(at)) {
        if (std::min(arc(tau, id), b(tau + 1, view.edge(id).head)) >= bottleneck) {
          rs.links.push_back(id);
          at = view.edge(id).head;
          break;
        }
      }
    }
    for (int tau = 0; tau <= d; ++tau) {
      auto& v = arc(tau, rs.links[static_cast<std::size_t>(tau)]);
      v = v <= bottleneck ? 0.0 : v - bottleneck;
    }
    admitted += bottleneck;
    out.routes.push_back(std::move(rs));
    out.probabilities.push_back(bottleneck);
    if (out.routes.size() > limit) throw ConservationViolated("decomposition failed to terminate");
  }
  out.drop = std::max(0.0, 1.0 - admitted);
  return out;
}

/// Inverse of decompose: f^tau_l = sum of probabilities of routes using l at tau.
/// Returns values laid out like ForwardingTable::raw(j).
inline std::vector<double> recompose(const RouteDistribution& dist, std::size_t num_links, const PacketTypeSpec& type) {
  std::vector<double> f((static_cast<std::size_t>(type.deadline) + 1) * num_links, 0.0);
  for (std::size_t k = 0; k < dist.routes.size(); ++k)
    for (std::size_t tau = 0; tau < dist.routes[k].links.size(); ++tau)
      f[tau * num_links + dist.routes[k].links[tau]] += dist.probabilities[k];
  return f;
}

}  // namespace dlsched
