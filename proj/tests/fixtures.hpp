#pragma once

#include <string>
#include <vector>

#include "dlsched/dlsched.hpp"

namespace testing_fixtures {

using namespace dlsched;

inline constexpr NodeId kU = 0, kA = 1, kV = 2, kB = 3;
inline constexpr LinkId kUA = 0, kAV = 1, kBA = 2, kBV = 3;

/// u -> a -> v with a side node b feeding a and v; unit capacities.
inline NetworkSpec four_node(int capacity = 1) {
  return NetworkSpec({"u", "a", "v", "b"},
                     {{kU, kA, capacity}, {kA, kV, capacity}, {kB, kA, capacity}, {kB, kV, capacity}});
}

/// Bidirectional ring.
inline NetworkSpec ring(int n, int capacity) {
  std::vector<std::string> names;
  std::vector<Link> links;
  for (int i = 0; i < n; ++i) names.push_back("n" + std::to_string(i));
  for (int i = 0; i < n; ++i) {
    links.push_back({static_cast<NodeId>(i), static_cast<NodeId>((i + 1) % n), capacity});
    links.push_back({static_cast<NodeId>((i + 1) % n), static_cast<NodeId>(i), capacity});
  }
  return NetworkSpec(names, links);
}

/// Each ordered pair is a link with probability `density`; a directed
/// ring through all nodes keeps the graph strongly connected.
inline NetworkSpec random_network(Rng& rng, int n, double density, int cmin, int cmax) {
  std::vector<std::string> names;
  std::vector<Link> links;
  for (int i = 0; i < n; ++i) names.push_back("n" + std::to_string(i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool ring_link = j == (i + 1) % n;
      if (ring_link || bernoulli(rng, density))
        links.push_back({static_cast<NodeId>(i), static_cast<NodeId>(j),
                         cmin + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cmax - cmin + 1)))});
    }
  return NetworkSpec(names, links);
}

inline std::vector<PacketTypeSpec> random_types(Rng& rng, const NetworkSpec& net, std::size_t count, int dmin, int dmax) {
  std::vector<PacketTypeSpec> types;
  const auto n = net.num_nodes();
  for (std::size_t j = 0; j < count; ++j) {
    const auto s = static_cast<NodeId>(uniform_index(rng, n));
    auto z = static_cast<NodeId>(uniform_index(rng, n - 1));
    if (z >= s) ++z;
    const int d = dmin + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(dmax - dmin + 1)));
    types.push_back({s, z, d, uniform(rng, 0.1, 1.0)});
  }
  return types;
}

inline std::vector<double> random_rates(Rng& rng, std::size_t count, double lo, double hi) {
  std::vector<double> r;
  for (std::size_t j = 0; j < count; ++j) r.push_back(uniform(rng, lo, hi));
  return r;
}

/// Table of the three-route type u -> v, d = 2: mass 0.3 goes u -> a -> v
/// and waits at v, mass 0.2 waits at u and then goes u -> a -> v.
inline ForwardingTable three_route_table(const SelfLoopView& view) {
  ForwardingTable t(view.num_links(), {{kU, kV, 2, 1.0}});
  t.at(0, kUA, 0) = 0.3;
  t.at(0, view.loop_of(kU), 0) = 0.2;
  t.at(0, kUA, 1) = 0.2;
  t.at(0, kAV, 1) = 0.3;
  t.at(0, kAV, 2) = 0.2;
  t.at(0, view.loop_of(kV), 2) = 0.3;
  return t;
}

}  // namespace testing_fixtures
