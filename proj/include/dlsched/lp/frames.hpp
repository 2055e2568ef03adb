#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "../errors.hpp"
#include "builders.hpp"

namespace dlsched::lp {

/// Mini-frames per cycle, ceil(1 + 2/eps).
inline std::size_t frame_cycle_length(double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("frame construction needs eps in (0, 1]");
  return static_cast<std::size_t>(std::ceil(1.0 + 2.0 / epsilon - 1e-12));
}

struct FramePlan {
  std::size_t cycle_length = 0;
  /// Global mini-frame indices left idle, one per cycle.
  std::vector<std::size_t> idle;
  /// Inclusive mini-frame ranges strictly between consecutive idle mini-frames.
  std::vector<std::pair<std::size_t, std::size_t>> frames;
  /// Mini-frames before the first idle and after the last one (may be empty).
  std::pair<std::size_t, std::size_t> head{0, 0};
  std::pair<std::size_t, std::size_t> tail{0, 0};
  bool has_head = false;
  bool has_tail = false;

  /// Longest frame in slots for mini-frames of `mini_len` slots.
  std::size_t max_frame_slots(std::size_t mini_len) const {
    std::size_t m = 0;
    for (auto [a, b] : frames) m = std::max(m, (b - a + 1) * mini_len);
    return m;
  }
};

/// cycles[c][i]: reward collected in mini-frame i of cycle c.
inline FramePlan build_frames(const std::vector<std::vector<double>>& cycles, double epsilon, int d_max) {
  FramePlan plan;
  plan.cycle_length = frame_cycle_length(epsilon);
  if (d_max < 1) throw BadCycleShape("mini-frames need d_max >= 1");
  if (cycles.empty()) throw BadCycleShape("no cycles supplied");
  for (const auto& c : cycles)
    if (c.size() != plan.cycle_length)
      throw BadCycleShape("cycle has " + std::to_string(c.size()) + " mini-frames, expected " +
                          std::to_string(plan.cycle_length));

  for (std::size_t c = 0; c < cycles.size(); ++c) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < plan.cycle_length; ++i)
      if (cycles[c][i] < cycles[c][best]) best = i;
    plan.idle.push_back(c * plan.cycle_length + best);
  }
  for (std::size_t k = 0; k + 1 < plan.idle.size(); ++k) {
    const auto a = plan.idle[k] + 1;
    const auto b = plan.idle[k + 1];
    if (a < b) plan.frames.emplace_back(a, b - 1);
  }
  const auto total = cycles.size() * plan.cycle_length;
  if (plan.idle.front() > 0) {
    plan.has_head = true;
    plan.head = {0, plan.idle.front() - 1};
  }
  if (plan.idle.back() + 1 < total) {
    plan.has_tail = true;
    plan.tail = {plan.idle.back() + 1, total - 1};
  }
  return plan;
}

struct FrameBasedValue {
  double fns_value = 0.0;
  double frame_value = 0.0;
  FramePlan plan;
};

/// Solves the time-indexed program over the whole horizon, idles the
/// cheapest mini-frame per cycle and re-solves every remaining segment
/// independently. The horizon is truncated to whole cycles.
inline FrameBasedValue frame_based_fns(const SelfLoopView& view, const std::vector<PacketTypeSpec>& types,
                                       const RateTable& rates, double epsilon) {
  const int dmax = max_deadline(types);
  if (dmax < 1) throw BadCycleShape("frame construction needs d_max >= 1");
  const auto mini = static_cast<std::size_t>(dmax);
  const auto n = frame_cycle_length(epsilon);
  const auto num_cycles = rates.size() / (n * mini);
  if (num_cycles < 1) throw BadCycleShape("horizon shorter than one cycle");
  const auto horizon = num_cycles * n * mini;

  FrameBasedValue out;
  const auto full = build_fns(view, types, rates, horizon, epsilon);
  const auto sol = solve(full);
  out.fns_value = sol.objective;

  std::vector<std::vector<double>> cycles(num_cycles, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < full.num_vars(); ++i) {
    const auto& k = full.key(i);
    const auto mf = static_cast<std::size_t>(k.slot) / mini;
    cycles[mf / n][mf % n] += full.objective()[i] * sol.values[i];
  }
  out.plan = build_frames(cycles, epsilon, dmax);

  auto solve_segment = [&](std::size_t first, std::size_t last) {
    const auto begin = first * mini;
    const auto len = (last - first + 1) * mini;
    RateTable seg(rates.begin() + static_cast<long>(begin), rates.begin() + static_cast<long>(begin + len));
    return solve(build_fns(view, types, seg, len, epsilon)).objective;
  };
  for (auto [a, b] : out.plan.frames) out.frame_value += solve_segment(a, b);
  if (out.plan.has_head) out.frame_value += solve_segment(out.plan.head.first, out.plan.head.second);
  if (out.plan.has_tail) out.frame_value += solve_segment(out.plan.tail.first, out.plan.tail.second);
  return out;
}

}  // namespace dlsched::lp
