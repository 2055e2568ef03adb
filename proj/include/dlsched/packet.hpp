#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "net_model.hpp"
#include "random.hpp"
#include "traffic.hpp"

namespace dlsched {

enum class PacketStatus { Live, Delivered, DroppedAdmit, DroppedCapacity, DroppedZeroSupport, Expired };

struct Packet {
  std::uint64_t id = 0;
  std::uint32_t type = 0;
  long arrival = 0;
  int age = 0;
  NodeId node = 0;
  PacketStatus status = PacketStatus::Live;
  bool admitted = false;
  /// Scheduler-owned tag: table index or reservation index, -1 if none.
  long plan = -1;
  /// Holds a capacity reservation; the engine serves these first.
  bool reserved = false;
};

enum class DropCause { Admit, ZeroSupport };

struct Decision {
  bool forward = false;
  LinkId link = 0;
  DropCause cause = DropCause::Admit;

  static Decision to(LinkId l) { return {true, l, DropCause::Admit}; }
  static Decision drop(DropCause c) { return {false, 0, c}; }
};

/// What a scheduler may see of a run. `arrivals` is the full realization;
/// schedulers only read rows of slots that have already started.
struct SimContext {
  const SelfLoopView* view = nullptr;
  const std::vector<PacketTypeSpec>* types = nullptr;
  const ArrivalMatrix* arrivals = nullptr;
  long horizon = 0;
  int d_max = 0;
};

class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual std::string name() const = 0;
  virtual void begin_run(const SimContext&) {}
  /// Called once at the start of every slot, before arrivals are injected.
  virtual void on_slot(long) {}
  virtual void on_arrival(Packet&, long) {}
  virtual Decision decide(const Packet& p, long t, Rng& rng) = 0;
};

}  // namespace dlsched
