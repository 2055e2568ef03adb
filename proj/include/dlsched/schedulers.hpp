#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "forwarding.hpp"
#include "lp/builders.hpp"
#include "packet.hpp"
#include "traffic.hpp"

namespace dlsched {

/// Precomputed next-hop laws of one table, indexed by (type, age, node).
class HopCache {
 public:
  HopCache(const ForwardingTable& table, const SelfLoopView& view, const std::vector<PacketTypeSpec>& types)
      : nodes_(view.num_nodes()) {
    for (std::size_t j = 0; j < types.size(); ++j) {
      offset_.push_back(hops_.size());
      for (int tau = 0; tau <= types[j].deadline; ++tau)
        for (NodeId v = 0; v < nodes_; ++v) hops_.push_back(hop_distribution(table, view, types[j], j, tau, v));
    }
  }

  const HopDistribution& at(std::size_t j, int tau, NodeId v) const {
    return hops_[offset_[j] + static_cast<std::size_t>(tau) * nodes_ + v];
  }

 private:
  std::size_t nodes_;
  std::vector<std::size_t> offset_;
  std::vector<HopDistribution> hops_;
};

/// One hop-by-hop forwarding decision from a table.
inline Decision fbpf_decide(const HopCache& hops, const Packet& p, Rng& rng) {
  const auto& h = hops.at(p.type, p.age, p.node);
  if (auto link = sample_hop(h, rng)) return Decision::to(*link);
  return Decision::drop(p.age == 0 && !h.off_support ? DropCause::Admit : DropCause::ZeroSupport);
}

class FbpfScheduler : public Scheduler {
 public:
  FbpfScheduler(ForwardingTable table, const SelfLoopView& view, const std::vector<PacketTypeSpec>& types)
      : table_(std::move(table)), hops_(table_, view, types) {}

  std::string name() const override { return "FBPF"; }
  Decision decide(const Packet& p, long, Rng& rng) override { return fbpf_decide(hops_, p, rng); }
  const ForwardingTable& table() const noexcept { return table_; }

 private:
  ForwardingTable table_;
  HopCache hops_;
};

/// FBPF driven by a time-indexed (or periodic) table; a packet follows the
/// slice of its arrival slot.
class TimeVaryingFbpfScheduler : public Scheduler {
 public:
  TimeVaryingFbpfScheduler(TimeVaryingForwardingTable table, const SelfLoopView& view,
                           const std::vector<PacketTypeSpec>& types)
      : table_(std::move(table)), view_(&view), types_(&types), hops_(table_.num_slots()) {}

  std::string name() const override { return table_.periodic ? "FBPF-NSP" : "FBPF-NS"; }

  void on_arrival(Packet& p, long t) override {
    const auto* slice = table_.for_arrival(t);
    if (!slice) return;
    const auto idx = table_.periodic ? static_cast<std::size_t>(t) % table_.num_slots() : static_cast<std::size_t>(t);
    if (!hops_[idx]) hops_[idx].emplace(*slice, *view_, *types_);
    p.plan = static_cast<long>(idx);
  }

  Decision decide(const Packet& p, long, Rng& rng) override {
    if (p.plan < 0) return Decision::drop(p.age == 0 ? DropCause::Admit : DropCause::ZeroSupport);
    return fbpf_decide(*hops_[static_cast<std::size_t>(p.plan)], p, rng);
  }

 private:
  TimeVaryingForwardingTable table_;
  const SelfLoopView* view_;
  const std::vector<PacketTypeSpec>* types_;
  std::vector<std::optional<HopCache>> hops_;
};

/// Greedy fastest-path reservations in the time-expanded residual graph.
class GlsFpLedger {
 public:
  void reset(const SelfLoopView& view, long horizon, int d_max) {
    view_ = &view;
    nr_ = view.num_real_links();
    slots_ = static_cast<std::size_t>(horizon + d_max + 1);
    used_.assign(slots_ * nr_, 0);
    routes_.clear();
  }

  /// Earliest-delivery route for a packet of `type` arriving at slot t,
  /// lexicographically smallest among ties; reserves it on success and
  /// returns its index.
  std::optional<long> reserve(const PacketTypeSpec& type, long t) {
    const auto& view = *view_;
    const auto n = view.num_nodes();
    const int d = type.deadline;
    auto residual_ok = [&](LinkId id, int tau) {
      if (view.is_loop(id)) return true;
      const auto slot = static_cast<std::size_t>(t + tau);
      if (slot >= slots_) return false;
      return used_[slot * nr_ + id] < view.edge(id).capacity.value();
    };
    std::vector<char> reach(static_cast<std::size_t>(d + 2) * n, 0);
    auto R = [&](int tau, NodeId v) -> char& { return reach[static_cast<std::size_t>(tau) * n + v]; };
    R(0, type.source) = 1;
    int arrive = -1;
    for (int tau = 0; tau <= d && arrive < 0; ++tau) {
      for (NodeId v = 0; v < n; ++v) {
        if (!R(tau, v)) continue;
        for (auto id : view.out(v))
          if (residual_ok(id, tau)) R(tau + 1, view.edge(id).head) = 1;
      }
      if (R(tau + 1, type.destination)) arrive = tau + 1;
    }
    if (arrive < 0) return std::nullopt;

    std::vector<char> good(static_cast<std::size_t>(arrive + 1) * n, 0);
    auto G = [&](int tau, NodeId v) -> char& { return good[static_cast<std::size_t>(tau) * n + v]; };
    G(arrive, type.destination) = 1;
    for (int tau = arrive - 1; tau >= 0; --tau)
      for (NodeId v = 0; v < n; ++v) {
        if (!R(tau, v)) continue;
        for (auto id : view.out(v))
          if (residual_ok(id, tau) && G(tau + 1, view.edge(id).head)) {
            G(tau, v) = 1;
            break;
          }
      }
    std::vector<LinkId> route;
    NodeId at = type.source;
    for (int tau = 0; tau < arrive; ++tau) {
      for (auto id : view.out(at)) {
        if (residual_ok(id, tau) && G(tau + 1, view.edge(id).head)) {
          route.push_back(id);
          at = view.edge(id).head;
          break;
        }
      }
    }
    for (int tau = 0; tau < arrive; ++tau) {
      const auto id = route[static_cast<std::size_t>(tau)];
      if (!view.is_loop(id)) ++used_[static_cast<std::size_t>(t + tau) * nr_ + id];
    }
    routes_.push_back(std::move(route));
    return static_cast<long>(routes_.size() - 1);
  }

  const std::vector<LinkId>& route(long idx) const { return routes_.at(static_cast<std::size_t>(idx)); }
  int reserved(LinkId id, long slot) const { return used_[static_cast<std::size_t>(slot) * nr_ + id]; }

 private:
  const SelfLoopView* view_ = nullptr;
  std::size_t nr_ = 0;
  std::size_t slots_ = 0;
  std::vector<int> used_;
  std::vector<std::vector<LinkId>> routes_;
};

class GlsFpScheduler : public Scheduler {
 public:
  std::string name() const override { return "GLS-FP"; }

  void begin_run(const SimContext& ctx) override {
    types_ = ctx.types;
    ledger_.reset(*ctx.view, ctx.horizon, ctx.d_max);
  }

  void on_arrival(Packet& p, long t) override {
    if (auto r = ledger_.reserve((*types_)[p.type], t)) {
      p.plan = *r;
      p.reserved = true;
    }
  }

  Decision decide(const Packet& p, long, Rng&) override {
    if (!p.reserved) return Decision::drop(DropCause::Admit);
    return Decision::to(ledger_.route(p.plan)[static_cast<std::size_t>(p.age)]);
  }

  const GlsFpLedger& ledger() const noexcept { return ledger_; }

 private:
  const std::vector<PacketTypeSpec>* types_ = nullptr;
  GlsFpLedger ledger_;
};

// --- DLPF ----------------------------------------------------------------------

struct Phase {
  long start = 0;
  long end = 0;
  /// Nominal active length used in the shrink factor.
  long nominal = 0;
};

struct PhasePlan {
  int R = 0;
  long T0 = 0;
  /// phases[0] is the warm-up phase.
  std::vector<Phase> phases;
};

/// Exponential phases: R = ceil(log2(1/eps)), T_0 = floor(eps (T - d_max R)),
/// phase phi >= 1 spans d_max + T_0 2^(phi-1) slots; the last phase ends at T.
inline PhasePlan dlpf_plan(long horizon, int d_max, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("DLPF needs eps in (0, 1)");
  PhasePlan plan;
  plan.R = std::max(1, static_cast<int>(std::ceil(std::log2(1.0 / epsilon) - 1e-12)));
  plan.T0 = static_cast<long>(std::floor(epsilon * static_cast<double>(horizon - static_cast<long>(d_max) * plan.R) + 1e-9));
  if (plan.T0 < 1) throw HorizonTooShort("horizon too short for DLPF phases (T_0 < 1)");
  plan.phases.push_back({0, plan.T0, plan.T0});
  long at = plan.T0;
  for (int phi = 1; phi <= plan.R; ++phi) {
    const long t_phi = plan.T0 << (phi - 1);
    const long end = phi == plan.R ? horizon : std::min(horizon, at + d_max + t_phi);
    plan.phases.push_back({at, end, t_phi});
    at = end;
  }
  return plan;
}

/// Fixed phases of `phase_len` slots; phase 0 is the first block.
inline PhasePlan fixed_plan(long horizon, long phase_len) {
  if (phase_len < 1) throw ConfigError("phase length must be at least 1");
  PhasePlan plan;
  plan.T0 = std::min(phase_len, horizon);
  for (long at = 0; at < horizon; at += phase_len) plan.phases.push_back({at, std::min(horizon, at + phase_len), phase_len});
  plan.R = static_cast<int>(plan.phases.size()) - 1;
  return plan;
}

/// 1 - zeta sqrt(ln(2J/eps) / (lambda_min T_phi)), clipped to (0, 1].
inline double dlpf_eta(double zeta, std::size_t num_types, double epsilon, double lambda_min, double t_phi) {
  if (zeta <= 0.0) return 1.0;
  const double eta =
      1.0 - zeta * std::sqrt(std::log(2.0 * static_cast<double>(num_types) / epsilon) / (lambda_min * t_phi));
  return std::clamp(eta, 1e-6, 1.0);
}

enum class Warmup { Idle, GlsFp };

struct DlpfOptions {
  double epsilon = 0.1;
  double zeta = 0.0;
  Warmup warmup = Warmup::GlsFp;
  /// 0 selects exponential phases.
  long phase_len = 0;
  /// Fixed phases only: estimate from the previous phase instead of all history.
  bool sliding_window = false;
};

/// Table for one phase: rates estimated from history, capacities shrunk by eta.
inline ForwardingTable dlpf_phase_table(const ArrivalMatrix& arrivals, long hist_begin, long hist_end,
                                        double nominal, const DlpfOptions& opt, const SelfLoopView& view,
                                        const std::vector<PacketTypeSpec>& types, double* eta_out = nullptr) {
  const auto est = estimate_rates(arrivals, static_cast<std::size_t>(hist_begin), static_cast<std::size_t>(hist_end));
  const double eta = dlpf_eta(opt.zeta, types.size(), opt.epsilon, est.lambda_min, nominal);
  if (eta_out) *eta_out = eta;
  return lp::solve_fs(view, types, est.lambda, opt.epsilon, eta);
}

class DlpfScheduler : public Scheduler {
 public:
  DlpfScheduler(DlpfOptions opt, const SelfLoopView& view, const std::vector<PacketTypeSpec>& types)
      : opt_(opt), view_(&view), types_(&types) {}

  std::string name() const override {
    return opt_.phase_len > 0 ? "DLPF-" + std::to_string(opt_.phase_len) : "DLPF-EXP";
  }

  void begin_run(const SimContext& ctx) override {
    arrivals_ = ctx.arrivals;
    plan_ = opt_.phase_len > 0 ? fixed_plan(ctx.horizon, opt_.phase_len) : dlpf_plan(ctx.horizon, ctx.d_max, opt_.epsilon);
    hops_.clear();
    etas_.clear();
    current_ = 0;
    gls_.begin_run(ctx);
  }

  void on_slot(long t) override {
    const auto next = static_cast<std::size_t>(current_) + 1;
    if (next < plan_.phases.size() && t == plan_.phases[next].start) {
      current_ = static_cast<long>(next);
      long begin = 0;
      if (opt_.phase_len > 0 && opt_.sliding_window) begin = plan_.phases[next - 1].start;
      double eta = 1.0;
      const auto table =
          dlpf_phase_table(*arrivals_, begin, t, static_cast<double>(plan_.phases[next].nominal), opt_, *view_, *types_, &eta);
      hops_.emplace_back(table, *view_, *types_);
      etas_.push_back(eta);
    }
  }

  void on_arrival(Packet& p, long t) override {
    if (current_ == 0) {
      if (opt_.warmup == Warmup::GlsFp) gls_.on_arrival(p, t);
      else p.plan = -1;
      return;
    }
    p.plan = current_;
  }

  Decision decide(const Packet& p, long t, Rng& rng) override {
    if (p.reserved) return gls_.decide(p, t, rng);
    if (p.plan <= 0) return Decision::drop(p.age == 0 ? DropCause::Admit : DropCause::ZeroSupport);
    return fbpf_decide(hops_[static_cast<std::size_t>(p.plan - 1)], p, rng);
  }

  const PhasePlan& plan() const noexcept { return plan_; }
  const std::vector<double>& etas() const noexcept { return etas_; }

 private:
  DlpfOptions opt_;
  const SelfLoopView* view_;
  const std::vector<PacketTypeSpec>* types_;
  const ArrivalMatrix* arrivals_ = nullptr;
  PhasePlan plan_;
  std::vector<HopCache> hops_;
  std::vector<double> etas_;
  long current_ = 0;
  GlsFpScheduler gls_;
};

}  // namespace dlsched
