#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"

namespace dlsched {

using NodeId = std::uint32_t;
using LinkId = std::uint32_t;

/// Per-slot link capacity in packets. Self-loops carry the unbounded
/// sentinel; it never takes part in arithmetic.
class Capacity {
 public:
  constexpr Capacity() = default;
  static constexpr Capacity packets(int n) { return Capacity(n); }
  static constexpr Capacity unbounded() { return Capacity(kUnboundedTag); }

  constexpr bool is_unbounded() const noexcept { return value_ == kUnboundedTag; }
  constexpr int value() const {
    if (is_unbounded()) throw Error("capacity value requested for an unbounded link");
    return value_;
  }
  /// True when one more packet fits after `used` packets this slot.
  constexpr bool admits(int used) const noexcept { return is_unbounded() || used < value_; }

  friend constexpr bool operator==(Capacity, Capacity) = default;

 private:
  static constexpr int kUnboundedTag = -1;
  constexpr explicit Capacity(int v) : value_(v) {}
  int value_ = 0;
};

struct Link {
  NodeId tail = 0;
  NodeId head = 0;
  int capacity = 1;
  /// Per-slot success probability; 1 means a reliable link.
  double reliability = 1.0;
};

/// Directed network with integer per-link capacities; ids are dense
/// indices in construction order.
class NetworkSpec {
 public:
  NetworkSpec() = default;
  NetworkSpec(std::vector<std::string> nodes, std::vector<Link> links)
      : nodes_(std::move(nodes)), links_(std::move(links)) {
    validate();
  }

  std::size_t num_nodes() const noexcept { return nodes_.size(); }
  std::size_t num_links() const noexcept { return links_.size(); }
  const std::vector<std::string>& node_names() const noexcept { return nodes_; }
  const std::vector<Link>& links() const noexcept { return links_; }
  const Link& link(LinkId id) const { return links_.at(id); }
  const std::string& node_name(NodeId v) const { return nodes_.at(v); }

  std::optional<NodeId> find_node(const std::string& name) const {
    auto it = std::find(nodes_.begin(), nodes_.end(), name);
    if (it == nodes_.end()) return std::nullopt;
    return static_cast<NodeId>(it - nodes_.begin());
  }

  NodeId node_index(const std::string& name) const {
    if (auto v = find_node(name)) return *v;
    throw ConfigError("unknown node '" + name + "'");
  }

  std::optional<LinkId> find_link(NodeId tail, NodeId head) const {
    for (std::size_t i = 0; i < links_.size(); ++i) {
      if (links_[i].tail == tail && links_[i].head == head) return static_cast<LinkId>(i);
    }
    return std::nullopt;
  }

  int min_capacity() const {
    int c = std::numeric_limits<int>::max();
    for (const auto& l : links_) c = std::min(c, l.capacity);
    return links_.empty() ? 0 : c;
  }

  int max_capacity() const {
    int c = 0;
    for (const auto& l : links_) c = std::max(c, l.capacity);
    return c;
  }

  /// Same topology with every capacity replaced by `capacity`.
  NetworkSpec with_uniform_capacity(int capacity) const {
    auto links = links_;
    for (auto& l : links) l.capacity = capacity;
    return NetworkSpec(nodes_, std::move(links));
  }

 private:
  void validate() const {
    for (std::size_t i = 0; i < links_.size(); ++i) {
      const auto& l = links_[i];
      if (l.tail >= nodes_.size() || l.head >= nodes_.size())
        throw ConfigError("link " + std::to_string(i) + " references an unknown node");
      if (l.tail == l.head) throw ConfigError("self-loop in base network at node '" + nodes_[l.tail] + "'");
      if (l.capacity < 1) throw ConfigError("link " + std::to_string(i) + " has capacity < 1");
      if (!(l.reliability > 0.0 && l.reliability <= 1.0))
        throw ConfigError("link " + std::to_string(i) + " reliability must lie in (0, 1]");
      for (std::size_t k = 0; k < i; ++k) {
        if (links_[k].tail == l.tail && links_[k].head == l.head)
          throw ConfigError("duplicate link " + nodes_[l.tail] + "->" + nodes_[l.head]);
      }
    }
    for (std::size_t a = 0; a < nodes_.size(); ++a)
      for (std::size_t b = 0; b < a; ++b)
        if (nodes_[a] == nodes_[b]) throw ConfigError("duplicate node name '" + nodes_[a] + "'");
  }

  std::vector<std::string> nodes_;
  std::vector<Link> links_;
};

/// The network with a hold-in-place loop at every node. Base links keep
/// their ids; the loop of node v has id num_real_links() + v.
class SelfLoopView {
 public:
  struct Edge {
    NodeId tail;
    NodeId head;
    Capacity capacity;
    double reliability;
    bool is_loop;
  };

  SelfLoopView() = default;
  explicit SelfLoopView(NetworkSpec net) : base_(std::move(net)) {
    const auto n = base_.num_nodes();
    out_.resize(n);
    in_.resize(n);
    for (const auto& l : base_.links())
      edges_.push_back({l.tail, l.head, Capacity::packets(l.capacity), l.reliability, false});
    for (NodeId v = 0; v < n; ++v) edges_.push_back({v, v, Capacity::unbounded(), 1.0, true});
    for (LinkId id = 0; id < edges_.size(); ++id) {
      out_[edges_[id].tail].push_back(id);
      in_[edges_[id].head].push_back(id);
    }
  }

  const NetworkSpec& base() const noexcept { return base_; }
  std::size_t num_nodes() const noexcept { return base_.num_nodes(); }
  std::size_t num_links() const noexcept { return edges_.size(); }
  std::size_t num_real_links() const noexcept { return base_.num_links(); }
  const Edge& edge(LinkId id) const { return edges_.at(id); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  bool is_loop(LinkId id) const { return edges_.at(id).is_loop; }
  LinkId loop_of(NodeId v) const { return static_cast<LinkId>(num_real_links() + v); }

  /// O(v), ascending link id; contains the loop (v,v).
  const std::vector<LinkId>& out(NodeId v) const { return out_.at(v); }
  /// I(v), ascending link id; contains the loop (v,v).
  const std::vector<LinkId>& in(NodeId v) const { return in_.at(v); }

  std::string link_label(LinkId id) const {
    const auto& e = edge(id);
    return "(" + base_.node_name(e.tail) + "," + base_.node_name(e.head) + ")";
  }

 private:
  NetworkSpec base_;
  std::vector<Edge> edges_;
  std::vector<std::vector<LinkId>> out_;
  std::vector<std::vector<LinkId>> in_;
};

inline SelfLoopView build_self_loop_view(const NetworkSpec& net) { return SelfLoopView(net); }

struct PacketTypeSpec {
  NodeId source = 0;
  NodeId destination = 0;
  int deadline = 0;
  double weight = 1.0;
};

inline void validate_types(const std::vector<PacketTypeSpec>& types, const NetworkSpec& net) {
  for (std::size_t j = 0; j < types.size(); ++j) {
    const auto& t = types[j];
    const auto at = "packet type " + std::to_string(j);
    if (t.source >= net.num_nodes() || t.destination >= net.num_nodes())
      throw ConfigError(at + " references an unknown node");
    if (t.source == t.destination) throw ConfigError(at + " has source equal to destination");
    if (t.deadline < 0) throw ConfigError(at + " has a negative deadline");
    if (!(t.weight >= 0.0)) throw ConfigError(at + " has a negative weight");
  }
}

inline int max_deadline(const std::vector<PacketTypeSpec>& types) {
  int d = 0;
  for (const auto& t : types) d = std::max(d, t.deadline);
  return d;
}

/// Longest route-schedule length L = max_j (d_j + 1).
inline int max_route_length(const std::vector<PacketTypeSpec>& types) {
  return types.empty() ? 1 : max_deadline(types) + 1;
}

struct RouteSchedule {
  std::size_t type = 0;
  /// k_0 ... k_{d_j}
  std::vector<LinkId> links;

  friend bool operator==(const RouteSchedule&, const RouteSchedule&) = default;
};

inline bool validate_route_schedule(const RouteSchedule& rs, const SelfLoopView& view, const PacketTypeSpec& type) {
  if (rs.links.size() != static_cast<std::size_t>(type.deadline) + 1) return false;
  for (auto id : rs.links)
    if (id >= view.num_links()) return false;
  if (view.edge(rs.links.front()).tail != type.source) return false;
  if (view.edge(rs.links.back()).head != type.destination) return false;
  for (std::size_t i = 0; i + 1 < rs.links.size(); ++i)
    if (view.edge(rs.links[i]).head != view.edge(rs.links[i + 1]).tail) return false;
  return true;
}

/// Which (node, age) pairs lie on some source-to-destination walk of a type.
/// Layer tau holds the position of a packet at age tau (before its
/// transmission at that age); layer d_j + 1 is the delivery layer.
class TimeLayers {
 public:
  TimeLayers(const SelfLoopView& view, const PacketTypeSpec& type)
      : n_(view.num_nodes()), layers_(static_cast<std::size_t>(type.deadline) + 2) {
    std::vector<char> fwd(layers_ * n_, 0), bwd(layers_ * n_, 0);
    fwd[idx(0, type.source)] = 1;
    for (std::size_t tau = 0; tau + 1 < layers_; ++tau)
      for (NodeId v = 0; v < n_; ++v)
        if (fwd[idx(tau, v)])
          for (auto id : view.out(v)) fwd[idx(tau + 1, view.edge(id).head)] = 1;
    bwd[idx(layers_ - 1, type.destination)] = 1;
    for (std::size_t tau = layers_ - 1; tau > 0; --tau)
      for (NodeId v = 0; v < n_; ++v)
        if (bwd[idx(tau, v)])
          for (auto id : view.in(v)) bwd[idx(tau - 1, view.edge(id).tail)] = 1;
    alive_.resize(layers_ * n_);
    for (std::size_t i = 0; i < alive_.size(); ++i) alive_[i] = fwd[i] && bwd[i];
  }

  std::size_t num_layers() const noexcept { return layers_; }
  bool alive(std::size_t tau, NodeId v) const { return tau < layers_ && v < n_ && alive_[idx(tau, v)]; }

  /// Link used at age tau lies on some valid route-schedule.
  bool arc_alive(const SelfLoopView& view, std::size_t tau, LinkId id) const {
    const auto& e = view.edge(id);
    return alive(tau, e.tail) && alive(tau + 1, e.head);
  }

  bool any_route() const { return alive_[idx(0, alive_source())]; }

 private:
  NodeId alive_source() const {
    for (NodeId v = 0; v < n_; ++v)
      if (alive_[idx(0, v)]) return v;
    return 0;
  }
  std::size_t idx(std::size_t tau, NodeId v) const { return tau * n_ + v; }
  std::size_t n_;
  std::size_t layers_;
  std::vector<char> alive_;
};

/// All valid route-schedules of a type in lexicographic link-id order.
/// Throws EnumerationOverflow once more than `cap` schedules exist.
inline std::vector<RouteSchedule> enumerate_route_schedules(std::size_t type_index, const PacketTypeSpec& type,
                                                            const SelfLoopView& view, std::size_t cap) {
  std::vector<RouteSchedule> out;
  const TimeLayers layers(view, type);
  const auto length = static_cast<std::size_t>(type.deadline) + 1;
  std::vector<LinkId> walk;
  walk.reserve(length);

  auto dfs = [&](auto&& self, NodeId at) -> void {
    const auto tau = walk.size();
    if (tau == length) {
      if (out.size() == cap)
        throw EnumerationOverflow("packet type " + std::to_string(type_index) + " has more than " +
                                  std::to_string(cap) + " route-schedules");
      out.push_back({type_index, walk});
      return;
    }
    for (auto id : view.out(at)) {
      if (!layers.arc_alive(view, tau, id)) continue;
      walk.push_back(id);
      self(self, view.edge(id).head);
      walk.pop_back();
    }
  };
  if (layers.alive(0, type.source)) dfs(dfs, type.source);
  return out;
}

// --- network files -----------------------------------------------------------

inline NetworkSpec network_from_json(const nlohmann::json& j) {
  try {
    std::vector<std::string> nodes = j.at("nodes").get<std::vector<std::string>>();
    std::vector<Link> links;
    auto lookup = [&](const std::string& name) -> NodeId {
      auto it = std::find(nodes.begin(), nodes.end(), name);
      if (it == nodes.end()) throw ConfigError("link references unknown node '" + name + "'");
      return static_cast<NodeId>(it - nodes.begin());
    };
    for (const auto& l : j.at("links")) {
      Link link;
      link.tail = lookup(l.at("tail").get<std::string>());
      link.head = lookup(l.at("head").get<std::string>());
      link.capacity = l.at("capacity").get<int>();
      link.reliability = l.value("reliability", 1.0);
      links.push_back(link);
    }
    return NetworkSpec(std::move(nodes), std::move(links));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("network file: ") + e.what());
  }
}

inline nlohmann::json network_to_json(const NetworkSpec& net) {
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : net.links()) {
    nlohmann::json e = {{"tail", net.node_name(l.tail)}, {"head", net.node_name(l.head)}, {"capacity", l.capacity}};
    if (l.reliability != 1.0) e["reliability"] = l.reliability;
    links.push_back(std::move(e));
  }
  return {{"nodes", net.node_names()}, {"links", std::move(links)}};
}

}  // namespace dlsched
