#include <gtest/gtest.h>

#include <cmath>

#include "dlsched/lp/builders.hpp"
#include "dlsched/lp/frames.hpp"
#include "dlsched/schedulers.hpp"
#include "fixtures.hpp"

using namespace dlsched;
using namespace testing_fixtures;

namespace {

NetworkSpec single_link(int cap = 1, double p = 1.0) { return NetworkSpec({"u", "v"}, {{0, 1, cap, p}}); }

double w_fs(const SelfLoopView& view, const std::vector<PacketTypeSpec>& types, const std::vector<double>& rates,
            double eps, lp::Backend b = lp::Backend::InteriorPoint) {
  return lp::solve_fs(view, types, rates, eps, 1.0, b).objective;
}

struct RandomInstance {
  NetworkSpec net;
  std::vector<PacketTypeSpec> types;
  std::vector<double> rates;
};

RandomInstance random_instance(std::uint64_t seed, int nodes, std::size_t count, int dmax) {
  Rng rng(seed);
  auto net = random_network(rng, nodes, 0.3, 1, 3);
  auto types = random_types(rng, net, count, 0, dmax);
  auto rates = random_rates(rng, count, 0.1, 2.0);
  return {std::move(net), std::move(types), std::move(rates)};
}

}  // namespace

TEST(BuildFs, SingleLinkUnitRate) {
  const SelfLoopView view(single_link());
  const auto t = lp::solve_fs(view, {{0, 1, 0, 1.0}}, {1.0}, 0.0);
  EXPECT_NEAR(t.objective, 1.0, 1e-7);
  EXPECT_NEAR(t.at(0, 0, 0), 1.0, 1e-7);
}

TEST(BuildFs, SingleLinkCapacityBinds) {
  const SelfLoopView view(single_link());
  const auto t = lp::solve_fs(view, {{0, 1, 0, 1.0}}, {2.0}, 0.0);
  EXPECT_NEAR(t.objective, 1.0, 1e-7);
  EXPECT_NEAR(t.at(0, 0, 0), 0.5, 1e-7);
}

TEST(BuildFs, UnreliableLinkScalesCapacity) {
  const SelfLoopView view(single_link(2, 0.25));
  EXPECT_NEAR(w_fs(view, {{0, 1, 0, 1.0}}, {4.0}, 0.0), 0.5, 1e-7);
}

TEST(BuildFs, ThreeRouteTableIsFeasibleAndSolverBeatsIt) {
  const SelfLoopView view(four_node());
  const std::vector<PacketTypeSpec> types{{kU, kV, 2, 1.0}};
  const auto table = three_route_table(view);
  EXPECT_TRUE(check_table(table, view, types, {0.5}, 0.0).ok());
  EXPECT_NEAR(link_loads(table, {0.5})[kAV], 0.25, 1e-12);

  const auto p = lp::build_fs(view, types, {0.5}, 0.0);
  std::vector<double> x(p.num_vars(), 0.0);
  for (std::size_t i = 0; i < p.num_vars(); ++i) {
    const auto& k = p.key(i);
    x[i] = table.at(0, static_cast<LinkId>(k.link), k.age);
  }
  EXPECT_LE(p.max_violation(x), 1e-12);
  const double point = p.evaluate_objective(x);
  EXPECT_NEAR(point, 0.25, 1e-12);
  const auto sol = lp::solve_fs(view, types, {0.5}, 0.0);
  EXPECT_GE(sol.objective, point - 1e-9);
  EXPECT_NEAR(sol.objective, 0.5, 1e-7);
}

TEST(Solve, SingleVariable) {
  lp::LpProblem p;
  const auto x = p.add_variable({0, 0, 0}, 1.0);
  p.add_row({{{x, 1.0}}, lp::Relation::LessEqual, 0.5});
  for (auto b : {lp::Backend::InteriorPoint, lp::Backend::Simplex}) EXPECT_NEAR(lp::solve(p, b).objective, 0.5, 1e-8);
}

TEST(Solve, InfeasibleThrows) {
  lp::LpProblem p;
  const auto x = p.add_variable({0, 0, 0}, 1.0);
  p.add_row({{{x, 1.0}}, lp::Relation::Equal, -1.0});
  EXPECT_THROW(lp::solve(p), SolverFailure);
  EXPECT_THROW(lp::solve(p, lp::Backend::Simplex), SolverFailure);
}

TEST(Solve, IpmAgreesWithSimplexOnRandomLps) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    lp::LpProblem p;
    const auto n = 2 + uniform_index(rng, 6);
    for (std::size_t i = 0; i < n; ++i) p.add_variable({static_cast<int>(i), 0, 0}, uniform(rng, -0.5, 2.0));
    const auto m = 1 + uniform_index(rng, 6);
    for (std::size_t r = 0; r < m; ++r) {
      lp::Row row{{}, lp::Relation::LessEqual, uniform(rng, 0.5, 3.0)};
      for (std::size_t i = 0; i < n; ++i)
        if (bernoulli(rng, 0.7)) row.terms.push_back({i, uniform(rng, 0.1, 2.0)});
      p.add_row(std::move(row));
    }
    // Box every variable so the LP stays bounded.
    for (std::size_t i = 0; i < n; ++i) p.add_row({{{i, 1.0}}, lp::Relation::LessEqual, 4.0});
    const double a = lp::solve(p).objective;
    const double b = lp::solve(p, lp::Backend::Simplex).objective;
    EXPECT_NEAR(a, b, 1e-6 * std::max(1.0, std::abs(b))) << "seed " << seed;
  }
}

TEST(Solve, BackendsAgreeOnFlowPrograms) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto inst = random_instance(seed, 4, 3, 3);
    const SelfLoopView view(inst.net);
    const double a = w_fs(view, inst.types, inst.rates, 0.1);
    const double b = w_fs(view, inst.types, inst.rates, 0.1, lp::Backend::Simplex);
    EXPECT_NEAR(a, b, 1e-6 * std::max(1.0, b)) << "seed " << seed;
  }
}

TEST(ShrinkCapacities, ScalesOnlyCapacityRows) {
  const SelfLoopView view(single_link(10));
  const auto p = lp::build_fs(view, {{0, 1, 0, 1.0}}, {5.0}, 0.25);
  const auto same = lp::shrink_capacities(p, 1.0);
  const auto half = lp::shrink_capacities(p, 0.5);
  ASSERT_EQ(half.num_rows(), p.num_rows());
  for (std::size_t r = 0; r < p.num_rows(); ++r) {
    EXPECT_EQ(same.rows()[r].bound, p.rows()[r].bound);
    if (p.rows()[r].kind == lp::RowKind::Capacity) {
      EXPECT_NEAR(p.rows()[r].bound, 10.0 / 1.25, 1e-12);
      EXPECT_NEAR(half.rows()[r].bound, 5.0 / 1.25, 1e-12);
    } else {
      EXPECT_EQ(half.rows()[r].bound, p.rows()[r].bound);
    }
  }
  EXPECT_THROW(lp::shrink_capacities(p, 0.0), InvalidEta);
  EXPECT_THROW(lp::shrink_capacities(p, -1.0), InvalidEta);
}

TEST(ShrinkCapacities, DlpfEtaExample) {
  EXPECT_NEAR(dlpf_eta(1.0, 10, 0.1, 0.5, 1000.0), 1.0 - std::sqrt(std::log(200.0) / 500.0), 1e-12);
  EXPECT_NEAR(dlpf_eta(1.0, 10, 0.1, 0.5, 1000.0), 0.8971, 5e-5);
  EXPECT_EQ(dlpf_eta(0.0, 10, 0.1, 0.5, 1000.0), 1.0);
}

TEST(UpperBound, Examples) {
  EXPECT_DOUBLE_EQ(lp::upper_bound_expected_optimal(1.0, 100, 0), 100.0);
  EXPECT_NEAR(lp::upper_bound_expected_optimal(1.0, 5000, 10), 5208.333333, 1e-5);
  EXPECT_THROW(lp::upper_bound_expected_optimal(1.0, 200, 10), HorizonTooShort);
}

TEST(BuildEi, SingleLinkThreeSlots) {
  const SelfLoopView view(single_link());
  const auto p = lp::build_ei(view, {{0, 1, 0, 1.0}}, stationary_rate_table({1.0}, 3), 3);
  EXPECT_NEAR(lp::solve(p).objective, 3.0, 1e-7);
}

TEST(BuildEi, ConflictInstanceDeliversBoth) {
  const SelfLoopView view(four_node());
  const std::vector<PacketTypeSpec> types{{kU, kV, 2, 1.0}, {kA, kV, 1, 1.0}};
  RateTable rates(3, std::vector<double>(2, 0.0));
  rates[0][0] = 1.0;
  rates[2][1] = 1.0;
  EXPECT_NEAR(lp::solve(lp::build_ei(view, types, rates, 3)).objective, 2.0, 1e-7);
  const RateTable zero(3, std::vector<double>(2, 0.0));
  EXPECT_NEAR(lp::solve(lp::build_ei(view, types, zero, 3)).objective, 0.0, 1e-9);
}

TEST(BuildEi, EnumerationOverflowPropagates) {
  const SelfLoopView view(ring(6, 1));
  EXPECT_THROW(lp::build_ei(view, {{0, 3, 8, 1.0}}, stationary_rate_table({1.0}, 2), 2, 5), EnumerationOverflow);
}

TEST(BuildFns, SingleSlotZeroDeadlineMatchesFs) {
  const auto inst = random_instance(3, 4, 3, 0);
  const SelfLoopView view(inst.net);
  const auto tv = lp::solve_fns(view, inst.types, stationary_rate_table(inst.rates, 1), 1, 0.2);
  EXPECT_NEAR(tv.objective, w_fs(view, inst.types, inst.rates, 0.2), 1e-6);
}

TEST(BuildFns, ZeroRates) {
  const SelfLoopView view(four_node());
  const auto tv = lp::solve_fns(view, {{kU, kV, 2, 1.0}}, stationary_rate_table({0.0}, 5), 5, 0.0);
  EXPECT_NEAR(tv.objective, 0.0, 1e-12);
}

// T W_FS <= W_FNS <= T W_FS / (1 - 2 d^2 / T) for stationary rates.
TEST(BuildFns, StationarySandwich) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto inst = random_instance(100 + seed, 4, 3, 2);
    const SelfLoopView view(inst.net);
    const int d = max_deadline(inst.types);
    const std::size_t horizon = 2 * static_cast<std::size_t>(d * d) + 4;
    for (double eps : {0.0, 0.2}) {
      const double w = w_fs(view, inst.types, inst.rates, eps);
      const auto tv = lp::solve_fns(view, inst.types, stationary_rate_table(inst.rates, horizon), horizon, eps);
      const double t = static_cast<double>(horizon);
      EXPECT_GE(tv.objective, t * w - 1e-6 * std::max(1.0, t * w)) << "seed " << seed;
      if (d > 0) EXPECT_LE(tv.objective, t * w / (1.0 - 2.0 * d * d / t) + 1e-6 * std::max(1.0, t * w));
    }
  }
}

TEST(BuildFnsp, PeriodOneIsStationary) {
  const auto inst = random_instance(7, 4, 3, 3);
  const SelfLoopView view(inst.net);
  const auto tv = lp::solve_fnsp(view, inst.types, stationary_rate_table(inst.rates, 1), 1, 0.1);
  EXPECT_NEAR(tv.objective, w_fs(view, inst.types, inst.rates, 0.1), 1e-6);
}

TEST(BuildFnsp, AlternatingRates) {
  const SelfLoopView view(single_link());
  for (double lam : {0.4, 1.0, 2.5}) {
    const RateTable rates{{lam}, {0.0}};
    const auto tv = lp::solve_fnsp(view, {{0, 1, 0, 1.0}}, rates, 2, 0.0);
    EXPECT_NEAR(tv.objective, std::min(lam, 1.0), 1e-7) << lam;
  }
}

TEST(BuildFnsp, ConstantRatesGivePerSlotFs) {
  const auto inst = random_instance(11, 4, 2, 2);
  const SelfLoopView view(inst.net);
  const double w = w_fs(view, inst.types, inst.rates, 0.0);
  for (std::size_t period : {2u, 3u}) {
    const auto tv = lp::solve_fnsp(view, inst.types, stationary_rate_table(inst.rates, period), period, 0.0);
    EXPECT_NEAR(tv.objective / static_cast<double>(period), w, 1e-6 * std::max(1.0, w));
  }
}

TEST(Properties, EpsilonMonotoneAndBounded) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(200 + seed, 5, 4, 3);
    const SelfLoopView view(inst.net);
    const double w0 = w_fs(view, inst.types, inst.rates, 0.0);
    double prev = w0;
    for (double eps : {0.05, 0.1, 0.25, 0.5, 1.0}) {
      const double w = w_fs(view, inst.types, inst.rates, eps);
      EXPECT_LE(w, prev + 1e-7 * std::max(1.0, prev)) << "seed " << seed << " eps " << eps;
      EXPECT_GE(w, w0 / (1.0 + eps) - 1e-7 * std::max(1.0, w0)) << "seed " << seed << " eps " << eps;
      prev = w;
    }
  }
}

TEST(Properties, RouteScheduleProgramMatchesFlowProgram) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(300 + seed, 4, 3, 3);
    const SelfLoopView view(inst.net);
    const double fs = w_fs(view, inst.types, inst.rates, 0.0);
    const double es = lp::solve(lp::build_es(view, inst.types, inst.rates)).objective;
    EXPECT_NEAR(es, fs, 1e-6 * std::max(1.0, fs)) << "seed " << seed;
  }
}

TEST(Properties, EveryTableSatisfiesItsInvariants) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = random_instance(400 + seed, 5, 4, 4);
    const SelfLoopView view(inst.net);
    const auto t = lp::solve_fs(view, inst.types, inst.rates, 0.3, 0.8);
    EXPECT_TRUE(check_table(t, view, inst.types, inst.rates, 0.3, 0.8).ok(1e-8));
    for (std::size_t j = 0; j < inst.types.size(); ++j)
      for (double v : t.raw(j)) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0 + 1e-8);
      }
  }
}

TEST(BuildFrames, IdleMiniFramePerCycle) {
  const auto plan = lp::build_frames({{5, 1, 5, 5, 5}, {5, 5, 5, 1, 5}}, 0.5, 2);
  EXPECT_EQ(plan.cycle_length, 5u);
  EXPECT_EQ(plan.idle, (std::vector<std::size_t>{1, 8}));
  ASSERT_EQ(plan.frames.size(), 1u);
  EXPECT_EQ(plan.frames[0], (std::pair<std::size_t, std::size_t>{2, 7}));
  EXPECT_TRUE(plan.has_head);
  EXPECT_TRUE(plan.has_tail);
  EXPECT_LE(plan.max_frame_slots(2), static_cast<std::size_t>((2 + 4 / 0.5) * 2));
}

TEST(BuildFrames, TiesIdleTheFirst) {
  const auto plan = lp::build_frames({{3, 3, 3}, {3, 3, 3}}, 1.0, 1);
  EXPECT_EQ(plan.idle, (std::vector<std::size_t>{0, 3}));
  EXPECT_FALSE(plan.has_head);
}

TEST(BuildFrames, CycleLength) {
  EXPECT_EQ(lp::frame_cycle_length(1.0), 3u);
  EXPECT_EQ(lp::frame_cycle_length(0.5), 5u);
  EXPECT_EQ(lp::frame_cycle_length(0.3), 8u);
  EXPECT_THROW(lp::build_frames({{1, 2}}, 1.0, 1), BadCycleShape);
  EXPECT_THROW(lp::build_frames({}, 1.0, 1), BadCycleShape);
}

TEST(BuildFrames, RandomMaxFrameLength) {
  Rng rng(5);
  for (double eps : {0.25, 0.5, 1.0}) {
    const auto n = lp::frame_cycle_length(eps);
    std::vector<std::vector<double>> cycles(4, std::vector<double>(n));
    for (auto& c : cycles)
      for (auto& v : c) v = uniform(rng, 0.0, 1.0);
    const auto plan = lp::build_frames(cycles, eps, 3);
    EXPECT_LE(static_cast<double>(plan.max_frame_slots(3)), (2.0 + 4.0 / eps) * 3.0 + 1e-9);
  }
}

// Dropping the cheapest mini-frame of each cycle loses at most a 1/N share.
TEST(BuildFrames, FrameBasedValueCloseToFull) {
  auto inst = random_instance(17, 4, 3, 2);
  for (auto& t : inst.types) t.deadline = std::max(t.deadline, 1);
  const SelfLoopView view(inst.net);
  const double eps = 1.0;
  const auto n = lp::frame_cycle_length(eps);
  const auto dmax = static_cast<std::size_t>(max_deadline(inst.types));
  const auto rates = stationary_rate_table(inst.rates, 3 * n * dmax);
  const auto v = lp::frame_based_fns(view, inst.types, rates, eps);
  EXPECT_LE(v.frame_value, v.fns_value + 1e-6 * std::max(1.0, v.fns_value));
  EXPECT_GE(v.frame_value, (1.0 - 1.0 / static_cast<double>(n)) * v.fns_value - 1e-6 * std::max(1.0, v.fns_value));
}
