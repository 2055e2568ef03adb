#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "../net_model.hpp"

namespace dlsched {

/// Stationary forwarding variables f[j][tau][link] for tau in [0, d_j].
class ForwardingTable {
 public:
  ForwardingTable() = default;
  ForwardingTable(std::size_t num_links, const std::vector<PacketTypeSpec>& types) : num_links_(num_links) {
    for (const auto& t : types) {
      deadlines_.push_back(t.deadline);
      f_.emplace_back((static_cast<std::size_t>(t.deadline) + 1) * num_links, 0.0);
    }
  }

  std::size_t num_types() const noexcept { return f_.size(); }
  std::size_t num_links() const noexcept { return num_links_; }
  int deadline(std::size_t j) const { return deadlines_.at(j); }

  double& at(std::size_t j, LinkId link, int age) { return f_[j][idx(j, link, age)]; }
  double at(std::size_t j, LinkId link, int age) const { return f_[j][idx(j, link, age)]; }
  /// Zero outside the age range of the type.
  double value(std::size_t j, LinkId link, int age) const {
    if (age < 0 || age > deadlines_[j]) return 0.0;
    return f_[j][idx(j, link, age)];
  }

  const std::vector<double>& raw(std::size_t j) const { return f_.at(j); }
  std::vector<double>& raw(std::size_t j) { return f_.at(j); }

  double objective = 0.0;
  double epsilon = 0.0;
  std::string config_hash;

 private:
  std::size_t idx(std::size_t, LinkId link, int age) const {
    return static_cast<std::size_t>(age) * num_links_ + link;
  }
  std::size_t num_links_ = 0;
  std::vector<int> deadlines_;
  std::vector<std::vector<double>> f_;
};

/// Time-indexed variables; slice t holds f^{tau t} for packets arriving in slot t.
/// A periodic table repeats its slices with period num_slots().
struct TimeVaryingForwardingTable {
  std::vector<ForwardingTable> slices;
  bool periodic = false;
  double objective = 0.0;
  double epsilon = 0.0;
  std::string config_hash;

  std::size_t num_slots() const noexcept { return slices.size(); }
  /// Table governing a packet that arrived in `slot`; nullptr outside the horizon.
  const ForwardingTable* for_arrival(long slot) const {
    if (slices.empty() || slot < 0) return nullptr;
    const auto n = static_cast<long>(slices.size());
    if (periodic) return &slices[static_cast<std::size_t>(slot % n)];
    return slot < n ? &slices[static_cast<std::size_t>(slot)] : nullptr;
  }
};

struct TableCheck {
  double conservation = 0.0;
  double admit_excess = 0.0;
  double boundary = 0.0;
  double capacity_excess = 0.0;
  double negativity = 0.0;

  double worst() const { return std::max({conservation, admit_excess, boundary, capacity_excess, negativity}); }
  bool ok(double tol = 1e-8) const { return worst() <= tol; }
};

/// Checks the typed invariants of a stationary table against its program:
/// admit sums, conservation, boundary zeros, shrunken capacities, sign.
inline TableCheck check_table(const ForwardingTable& table, const SelfLoopView& view,
                              const std::vector<PacketTypeSpec>& types, const std::vector<double>& rates,
                              double epsilon, double eta = 1.0) {
  TableCheck c;
  const auto nl = view.num_links();
  std::vector<double> load(nl, 0.0);
  for (std::size_t j = 0; j < types.size(); ++j) {
    const auto& ty = types[j];
    for (const auto v : table.raw(j)) c.negativity = std::max(c.negativity, -v);
    double admit = 0.0;
    for (auto id : view.out(ty.source)) admit += table.at(j, id, 0);
    c.admit_excess = std::max(c.admit_excess, admit - 1.0);
    for (LinkId id = 0; id < nl; ++id) {
      const auto& e = view.edge(id);
      if (e.tail != ty.source) c.boundary = std::max(c.boundary, std::abs(table.at(j, id, 0)));
      if (e.head != ty.destination) c.boundary = std::max(c.boundary, std::abs(table.at(j, id, ty.deadline)));
      for (int tau = 0; tau <= ty.deadline; ++tau) load[id] += rates[j] * table.at(j, id, tau);
    }
    for (int tau = 1; tau <= ty.deadline; ++tau)
      for (NodeId v = 0; v < view.num_nodes(); ++v) {
        double in = 0.0, out = 0.0;
        for (auto id : view.in(v)) in += table.at(j, id, tau - 1);
        for (auto id : view.out(v)) out += table.at(j, id, tau);
        c.conservation = std::max(c.conservation, std::abs(in - out));
      }
  }
  for (LinkId id = 0; id < view.num_real_links(); ++id) {
    const auto& e = view.edge(id);
    const double cap = eta * e.capacity.value() * e.reliability / (1.0 + epsilon);
    c.capacity_excess = std::max(c.capacity_excess, load[id] - cap);
  }
  return c;
}

/// Expected per-slot load of every link, sum_j sum_tau lambda_j f.
inline std::vector<double> link_loads(const ForwardingTable& table, const std::vector<double>& rates) {
  std::vector<double> load(table.num_links(), 0.0);
  for (std::size_t j = 0; j < table.num_types(); ++j)
    for (int tau = 0; tau <= table.deadline(j); ++tau)
      for (LinkId id = 0; id < table.num_links(); ++id) load[id] += rates[j] * table.at(j, id, tau);
  return load;
}

}  // namespace dlsched
