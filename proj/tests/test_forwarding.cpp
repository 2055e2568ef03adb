#include <gtest/gtest.h>

#include <cmath>

#include "dlsched/forwarding.hpp"
#include "dlsched/lp/builders.hpp"
#include "dlsched/schedulers.hpp"
#include "dlsched/sim_engine.hpp"
#include "fixtures.hpp"

using namespace dlsched;
using namespace testing_fixtures;

namespace {

const PacketTypeSpec kThreeRouteType{kU, kV, 2, 1.0};

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(AdmitProbability, Examples) {
  const SelfLoopView view(four_node());
  ForwardingTable t(view.num_links(), {kThreeRouteType});
  EXPECT_EQ(admit_probability(t, view, kThreeRouteType, 0), 0.0);
  t.at(0, kUA, 0) = 0.7;
  t.at(0, view.loop_of(kU), 0) = 0.3;
  EXPECT_DOUBLE_EQ(admit_probability(t, view, kThreeRouteType, 0), 1.0);

  const SelfLoopView line(NetworkSpec({"u", "v"}, {{0, 1, 1}}));
  const PacketTypeSpec direct{0, 1, 0, 1.0};
  ForwardingTable s(line.num_links(), {direct});
  s.at(0, 0, 0) = 0.4;
  EXPECT_DOUBLE_EQ(admit_probability(s, line, direct, 0), 0.4);
}

TEST(HopDistribution, NormalizesLaterAges) {
  const SelfLoopView view(four_node());
  ForwardingTable t(view.num_links(), {kThreeRouteType});
  t.at(0, kAV, 1) = 0.3;
  t.at(0, view.loop_of(kA), 1) = 0.1;
  const auto h = hop_distribution(t, view, kThreeRouteType, 0, 1, kA);
  ASSERT_EQ(h.links.size(), 2u);
  EXPECT_EQ(h.links[0].first, kAV);
  EXPECT_DOUBLE_EQ(h.links[0].second, 0.75);
  EXPECT_DOUBLE_EQ(h.links[1].second, 0.25);
  EXPECT_EQ(h.drop, 0.0);
}

TEST(HopDistribution, AgeZeroKeepsResidualDrop) {
  const SelfLoopView view(four_node());
  ForwardingTable t(view.num_links(), {kThreeRouteType});
  t.at(0, kUA, 0) = 0.7;
  const auto h = hop_distribution(t, view, kThreeRouteType, 0, 0, kU);
  ASSERT_EQ(h.links.size(), 1u);
  EXPECT_DOUBLE_EQ(h.links[0].second, 0.7);
  EXPECT_NEAR(h.drop, 0.3, 1e-15);
  EXPECT_FALSE(h.off_support);
}

TEST(HopDistribution, ZeroNormalizerDrops) {
  const SelfLoopView view(four_node());
  const ForwardingTable t(view.num_links(), {kThreeRouteType});
  const auto h = hop_distribution(t, view, kThreeRouteType, 0, 1, kB);
  EXPECT_TRUE(h.links.empty());
  EXPECT_EQ(h.drop, 1.0);
  EXPECT_TRUE(h.off_support);
  Rng rng(1);
  EXPECT_FALSE(sample_hop(h, rng).has_value());
}

TEST(Decompose, ThreeRouteTableUsesAtMostThreeRoutes) {
  const SelfLoopView view(four_node());
  const auto t = three_route_table(view);
  const auto d = decompose(t, view, kThreeRouteType, 0);
  EXPECT_LE(d.routes.size(), 3u);
  double sum = d.drop;
  for (std::size_t k = 0; k < d.routes.size(); ++k) {
    EXPECT_TRUE(validate_route_schedule(d.routes[k], view, kThreeRouteType));
    EXPECT_GE(d.probabilities[k], 0.0);
    sum += d.probabilities[k];
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
  EXPECT_NEAR(d.drop, 0.5, 1e-12);
  EXPECT_LE(max_abs_diff(recompose(d, view.num_links(), kThreeRouteType), t.raw(0)), 1e-9);
}

TEST(Decompose, SinglePath) {
  const SelfLoopView view(four_node());
  ForwardingTable t(view.num_links(), {kThreeRouteType});
  t.at(0, kUA, 0) = 0.4;
  t.at(0, kAV, 1) = 0.4;
  t.at(0, view.loop_of(kV), 2) = 0.4;
  const auto d = decompose(t, view, kThreeRouteType, 0);
  ASSERT_EQ(d.routes.size(), 1u);
  EXPECT_NEAR(d.probabilities[0], 0.4, 1e-15);
  EXPECT_NEAR(d.drop, 0.6, 1e-15);
  EXPECT_EQ(d.routes[0].links, (std::vector<LinkId>{kUA, kAV, view.loop_of(kV)}));
}

TEST(Decompose, ZeroTable) {
  const SelfLoopView view(four_node());
  const ForwardingTable t(view.num_links(), {kThreeRouteType});
  const auto d = decompose(t, view, kThreeRouteType, 0);
  EXPECT_TRUE(d.routes.empty());
  EXPECT_EQ(d.drop, 1.0);
  const auto f = recompose(d, view.num_links(), kThreeRouteType);
  for (double v : f) EXPECT_EQ(v, 0.0);
}

TEST(Decompose, NegativeBeyondClipIsAnError) {
  const SelfLoopView view(four_node());
  ForwardingTable t(view.num_links(), {kThreeRouteType});
  t.at(0, kUA, 0) = -1e-6;
  EXPECT_THROW(decompose(t, view, kThreeRouteType, 0), ConservationViolated);
  t.at(0, kUA, 0) = 0.5;
  EXPECT_THROW(decompose(t, view, kThreeRouteType, 0), ConservationViolated);
}

TEST(Recompose, SingleRouteIsIndicator) {
  const SelfLoopView view(four_node());
  RouteDistribution d;
  d.routes.push_back({0, {view.loop_of(kU), kUA, kAV}});
  d.probabilities.push_back(1.0);
  d.drop = 0.0;
  const auto f = recompose(d, view.num_links(), kThreeRouteType);
  const auto nl = view.num_links();
  double total = 0.0;
  for (double v : f) total += v;
  EXPECT_EQ(total, 3.0);
  EXPECT_EQ(f[view.loop_of(kU)], 1.0);
  EXPECT_EQ(f[nl + kUA], 1.0);
  EXPECT_EQ(f[2 * nl + kAV], 1.0);
}

// Random route mixtures recomposed into tables, then decomposed again.
TEST(Decompose, RoundTripOnRandomMixtures) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto net = random_network(rng, 3 + static_cast<int>(uniform_index(rng, 3)), 0.4, 1, 2);
    const SelfLoopView view(net);
    const auto type = random_types(rng, net, 1, 1, 4)[0];
    const auto routes = enumerate_route_schedules(0, type, view, 200000);
    if (routes.empty()) continue;
    RouteDistribution mix;
    double left = uniform(rng, 0.3, 1.0);
    mix.drop = 1.0 - left;
    const auto picks = 1 + uniform_index(rng, std::min<std::size_t>(routes.size(), 5));
    for (std::size_t k = 0; k < picks; ++k) {
      const double p = k + 1 == picks ? left : left * uniform(rng, 0.1, 0.6);
      left -= p;
      mix.routes.push_back(routes[uniform_index(rng, routes.size())]);
      mix.probabilities.push_back(p);
    }
    ForwardingTable t(view.num_links(), {type});
    t.raw(0) = recompose(mix, view.num_links(), type);
    const auto d = decompose(t, view, type, 0);
    EXPECT_LE(d.routes.size(), (static_cast<std::size_t>(type.deadline) + 1) * view.num_links());
    EXPECT_LE(max_abs_diff(recompose(d, view.num_links(), type), t.raw(0)), 1e-9) << "seed " << seed;
    EXPECT_NEAR(d.drop, mix.drop, 1e-9);
  }
}

// Tables from the LP: decomposition reproduces them and never adds load.
TEST(Decompose, RoundTripOnSolvedTables) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(50 + seed);
    const auto net = random_network(rng, 5, 0.3, 1, 2);
    const SelfLoopView view(net);
    const auto types = random_types(rng, net, 3, 1, 4);
    const auto rates = random_rates(rng, 3, 0.2, 2.0);
    const auto t = lp::solve_fs(view, types, rates, 0.1);
    const auto loads = link_loads(t, rates);
    std::vector<double> rebuilt(view.num_links(), 0.0);
    for (std::size_t j = 0; j < types.size(); ++j) {
      const auto d = decompose(t, view, types[j], j);
      const auto f = recompose(d, view.num_links(), types[j]);
      EXPECT_LE(max_abs_diff(f, t.raw(j)), 1e-9) << "seed " << seed << " type " << j;
      for (std::size_t k = 0; k < d.routes.size(); ++k)
        for (auto id : d.routes[k].links) rebuilt[id] += rates[j] * d.probabilities[k];
    }
    for (LinkId id = 0; id < view.num_real_links(); ++id) EXPECT_LE(rebuilt[id], loads[id] + 1e-9);
  }
}

// Without capacity enforcement, per-(link, age) send rates of FBPF match
// lambda_j f within 3 standard errors. Packets leave the system on reaching
// the destination, so hops out of it are never sent.
TEST(HopSampling, ReproducesTableLoads) {
  const SelfLoopView view(four_node(2));
  const std::vector<PacketTypeSpec> types{kThreeRouteType, {kB, kV, 1, 1.0}};
  const std::vector<double> rates{0.8, 0.5};
  ForwardingTable full(view.num_links(), types);
  full.raw(0) = three_route_table(view).raw(0);
  full.at(1, kBA, 0) = 0.3;
  full.at(1, kAV, 1) = 0.3;
  full.at(1, kBV, 0) = 0.6;
  full.at(1, view.loop_of(kV), 1) = 0.6;

  const long horizon = 40000;
  const auto arrivals =
      sample_arrivals({process::Bernoulli{rates[0]}, process::Bernoulli{rates[1]}}, static_cast<std::size_t>(horizon), 3);
  FbpfScheduler sched(full, view, types);
  LoadProbe probe;
  probe.reset(types, view.num_links());
  probe.first_slot = 2;
  probe.last_slot = horizon - 1;
  EngineOptions opt;
  opt.enforce_capacity = false;
  opt.probe = &probe;
  run_simulation(view, types, arrivals, sched, horizon, 9, opt);
  for (std::size_t j = 0; j < types.size(); ++j)
    for (int tau = 0; tau <= types[j].deadline; ++tau)
      for (LinkId id = 0; id < view.num_links(); ++id) {
        if (view.edge(id).tail == types[j].destination) continue;
        const double want = rates[j] * full.at(j, id, tau);
        EXPECT_NEAR(probe.mean(j, tau, id), want, 3.0 * probe.standard_error(j, tau, id) + 1e-12)
            << "type " << j << " age " << tau << " link " << view.link_label(id);
      }
}
