#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "net_model.hpp"
#include "packet.hpp"
#include "random.hpp"
#include "traffic.hpp"

namespace dlsched {

struct TypeCounters {
  long arrived = 0;
  long admitted = 0;
  long delivered = 0;
  long dropped_admit = 0;
  long dropped_capacity = 0;
  long dropped_zero_support = 0;
  long expired = 0;

  friend bool operator==(const TypeCounters&, const TypeCounters&) = default;
};

/// Per-slot counts of type-j packets sent over link l at age tau, summed
/// (and squared) over the measured slots.
struct LoadProbe {
  long first_slot = 0;
  long last_slot = -1;
  long slots = 0;
  std::vector<double> sum;
  std::vector<double> sumsq;
  std::size_t links = 0;
  std::vector<std::size_t> offset;

  void reset(const std::vector<PacketTypeSpec>& types, std::size_t num_links) {
    links = num_links;
    offset.clear();
    std::size_t at = 0;
    for (const auto& t : types) {
      offset.push_back(at);
      at += (static_cast<std::size_t>(t.deadline) + 1) * num_links;
    }
    sum.assign(at, 0.0);
    sumsq.assign(at, 0.0);
    slots = 0;
  }
  std::size_t index(std::size_t j, int tau, LinkId l) const {
    return offset[j] + static_cast<std::size_t>(tau) * links + l;
  }
  double mean(std::size_t j, int tau, LinkId l) const { return slots ? sum[index(j, tau, l)] / slots : 0.0; }
  /// Standard error of the per-slot mean.
  double standard_error(std::size_t j, int tau, LinkId l) const {
    if (slots < 2) return 0.0;
    const double n = static_cast<double>(slots);
    const double m = sum[index(j, tau, l)] / n;
    const double var = std::max(0.0, (sumsq[index(j, tau, l)] - n * m * m) / (n - 1.0));
    return std::sqrt(var / n);
  }
};

struct EngineOptions {
  bool enforce_capacity = true;
  /// Draw per-slot capacity Binomial(C, p) on links with reliability < 1.
  bool unreliable = false;
  bool record_usage = false;
  LoadProbe* probe = nullptr;
};

struct SimResult {
  double reward = 0.0;
  std::vector<TypeCounters> counters;
  /// Total packets sent per link (self-loops included).
  std::vector<long> link_usage;
  /// usage[t * |L̄| + l], only when recorded.
  std::vector<int> slot_usage;
  std::size_t num_links = 0;
  long horizon = 0;
  long slots_run = 0;
  std::uint64_t seed = 0;
  std::string scheduler;
  std::string config_hash;

  long total(long TypeCounters::*field) const {
    long s = 0;
    for (const auto& c : counters) s += c.*field;
    return s;
  }
};

/// Post-admission drop rate per type: (capacity + zero-support drops) / admitted.
inline std::vector<double> measure_drop_rate(const SimResult& r) {
  std::vector<double> out;
  for (const auto& c : r.counters)
    out.push_back(c.admitted ? static_cast<double>(c.dropped_capacity + c.dropped_zero_support) / c.admitted : 0.0);
  return out;
}

inline bool counters_consistent(const SimResult& r) {
  for (const auto& c : r.counters) {
    if (c.arrived != c.admitted + c.dropped_admit) return false;
    if (c.admitted != c.delivered + c.dropped_capacity + c.dropped_zero_support + c.expired) return false;
  }
  return true;
}

/// Slot-synchronous execution over slots [0, T + d_max): inject arrivals
/// (t < T), collect decisions in a seeded random order (reserved packets
/// first), admit onto links within capacity, move, deliver, expire.
inline SimResult run_simulation(const SelfLoopView& view, const std::vector<PacketTypeSpec>& types,
                                const ArrivalMatrix& arrivals, Scheduler& scheduler, long horizon, std::uint64_t seed,
                                const EngineOptions& opt = {}) {
  if (arrivals.types() != types.size()) throw ConfigMismatch("arrival matrix has a different number of types");
  if (static_cast<long>(arrivals.slots()) < horizon) throw ConfigMismatch("arrival matrix shorter than the horizon");
  validate_types(types, view.base());

  const int d_max = max_deadline(types);
  const auto nl = view.num_links();
  const auto nr = view.num_real_links();
  SimResult res;
  res.counters.assign(types.size(), {});
  res.link_usage.assign(nl, 0);
  res.num_links = nl;
  res.horizon = horizon;
  res.seed = seed;
  res.scheduler = scheduler.name();
  res.slots_run = horizon + d_max;
  if (opt.record_usage) res.slot_usage.assign(static_cast<std::size_t>(res.slots_run) * nl, 0);

  Rng order_rng(derive_seed(seed, stream::kEngineOrder));
  Rng sched_rng(derive_seed(seed, stream::kScheduler));
  Rng cap_rng(derive_seed(seed, stream::kCapacity));

  SimContext ctx{&view, &types, &arrivals, horizon, d_max};
  scheduler.begin_run(ctx);

  std::vector<int> capacity(nr);
  std::vector<int> used(nl);
  std::vector<Packet> live, next;
  std::vector<std::size_t> order;
  std::vector<Decision> decisions;
  std::vector<std::size_t> probe_touched;
  std::vector<int> probe_count;
  if (opt.probe) probe_count.assign(opt.probe->sum.size(), 0);
  std::uint64_t next_id = 0;

  for (long t = 0; t < res.slots_run; ++t) {
    scheduler.on_slot(t);
    if (t < horizon) {
      for (std::size_t j = 0; j < types.size(); ++j) {
        const int a = arrivals.at(static_cast<std::size_t>(t), j);
        for (int n = 0; n < a; ++n) {
          Packet p;
          p.id = next_id++;
          p.type = static_cast<std::uint32_t>(j);
          p.arrival = t;
          p.node = types[j].source;
          scheduler.on_arrival(p, t);
          ++res.counters[j].arrived;
          live.push_back(p);
        }
      }
    }

    for (LinkId id = 0; id < nr; ++id) {
      const auto& e = view.edge(id);
      int c = e.capacity.value();
      if (opt.unreliable && e.reliability < 1.0) {
        std::binomial_distribution<int> dist(c, e.reliability);
        c = dist(cap_rng);
      }
      capacity[id] = c;
    }
    std::fill(used.begin(), used.end(), 0);

    order.resize(live.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, order_rng);
    std::stable_partition(order.begin(), order.end(), [&](std::size_t i) { return live[i].reserved; });

    next.clear();
    for (auto i : order) {
      Packet& p = live[i];
      auto& cnt = res.counters[p.type];
      const Decision dec = scheduler.decide(p, t, sched_rng);
      if (!dec.forward) {
        if (!p.admitted && dec.cause == DropCause::Admit) {
          p.status = PacketStatus::DroppedAdmit;
          ++cnt.dropped_admit;
        } else {
          if (!p.admitted) {
            p.admitted = true;
            ++cnt.admitted;
          }
          p.status = PacketStatus::DroppedZeroSupport;
          ++cnt.dropped_zero_support;
        }
        continue;
      }
      const auto& e = view.edge(dec.link);
      if (e.tail != p.node) throw Error("scheduler forwarded a packet over a link not leaving its node");
      if (!p.admitted) {
        p.admitted = true;
        ++cnt.admitted;
      }
      if (opt.enforce_capacity && !e.is_loop && used[dec.link] >= capacity[dec.link]) {
        p.status = PacketStatus::DroppedCapacity;
        ++cnt.dropped_capacity;
        continue;
      }
      ++used[dec.link];
      ++res.link_usage[dec.link];
      if (opt.probe) {
        const auto k = opt.probe->index(p.type, p.age, dec.link);
        if (probe_count[k]++ == 0) probe_touched.push_back(k);
      }
      p.node = e.head;
      ++p.age;
      if (p.node == types[p.type].destination) {
        p.status = PacketStatus::Delivered;
        ++cnt.delivered;
        res.reward += types[p.type].weight;
      } else if (p.age > types[p.type].deadline) {
        p.status = PacketStatus::Expired;
        ++cnt.expired;
      } else {
        next.push_back(p);
      }
    }
    live.swap(next);

    if (opt.enforce_capacity)
      for (LinkId id = 0; id < nr; ++id)
        if (used[id] > capacity[id]) throw Error("physical capacity exceeded on link " + view.link_label(id));
    if (opt.record_usage)
      for (LinkId id = 0; id < nl; ++id) res.slot_usage[static_cast<std::size_t>(t) * nl + id] = used[id];
    if (opt.probe) {
      auto& pr = *opt.probe;
      if (t >= pr.first_slot && (pr.last_slot < 0 || t <= pr.last_slot)) {
        ++pr.slots;
        for (auto k : probe_touched) {
          pr.sum[k] += probe_count[k];
          pr.sumsq[k] += static_cast<double>(probe_count[k]) * probe_count[k];
        }
      }
      for (auto k : probe_touched) probe_count[k] = 0;
      probe_touched.clear();
    }
  }
  if (!live.empty()) throw Error("packets still live after the final slot");
  return res;
}

}  // namespace dlsched
