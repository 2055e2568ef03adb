#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "forwarding.hpp"
#include "lp/tables.hpp"
#include "net_model.hpp"
#include "random.hpp"
#include "sim_engine.hpp"
#include "traffic.hpp"

namespace dlsched::io {

inline constexpr int kSchemaVersion = 1;
inline constexpr double kTableEntryFloor = 1e-10;

using nlohmann::json;

/// FNV-1a over the canonical dump; object keys are already sorted.
inline std::string config_hash(const json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
  return buf;
}

/// Shortest round-trip decimal form, so CSV cells are stable across runs.
inline std::string fmt(double x) {
  char buf[32];
  double back = 0.0;
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    std::sscanf(buf, "%lf", &back);
    if (back == x) break;
  }
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path.string() + "': " + e.what());
  }
}

inline json types_to_json(const std::vector<PacketTypeSpec>& types, const NetworkSpec& net) {
  json out = json::array();
  for (const auto& t : types)
    out.push_back({{"source", net.node_name(t.source)},
                   {"destination", net.node_name(t.destination)},
                   {"deadline", t.deadline},
                   {"weight", t.weight}});
  return out;
}

inline std::vector<PacketTypeSpec> types_from_json(const json& j, const NetworkSpec& net) {
  std::vector<PacketTypeSpec> types;
  auto node = [&](const json& v) -> NodeId {
    const auto name = v.get<std::string>();
    auto id = net.find_node(name);
    if (!id) throw ConfigError("packet type references unknown node '" + name + "'");
    return *id;
  };
  try {
    for (const auto& t : j)
      types.push_back({node(t.at("source")), node(t.at("destination")), t.at("deadline").get<int>(),
                       t.value("weight", 1.0)});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("packet types: ") + e.what());
  }
  validate_types(types, net);
  return types;
}

inline json link_json(const SelfLoopView& view, LinkId id) {
  const auto& e = view.edge(id);
  return json::array({view.base().node_name(e.tail), view.base().node_name(e.head)});
}

namespace detail {
inline json table_entries(const ForwardingTable& t, const SelfLoopView& view, long slot) {
  json entries = json::array();
  for (std::size_t j = 0; j < t.num_types(); ++j)
    for (int tau = 0; tau <= t.deadline(j); ++tau)
      for (LinkId id = 0; id < t.num_links(); ++id) {
        const double v = t.at(j, id, tau);
        if (v < kTableEntryFloor) continue;
        json e = {{"type", j}, {"link", link_json(view, id)}, {"age", tau}, {"value", v}};
        if (slot >= 0) e["slot"] = slot;
        entries.push_back(std::move(e));
      }
  return entries;
}
}  // namespace detail

inline json table_to_json(const ForwardingTable& t, const SelfLoopView& view, std::uint64_t seed = 0) {
  return {{"schema_version", kSchemaVersion}, {"config_hash", t.config_hash}, {"seed", seed},
          {"epsilon", t.epsilon},            {"objective", t.objective},     {"entries", detail::table_entries(t, view, -1)}};
}

inline json tv_table_to_json(const TimeVaryingForwardingTable& tv, const SelfLoopView& view, std::uint64_t seed = 0) {
  json entries = json::array();
  for (std::size_t s = 0; s < tv.num_slots(); ++s)
    for (auto& e : detail::table_entries(tv.slices[s], view, static_cast<long>(s))) entries.push_back(std::move(e));
  return {{"schema_version", kSchemaVersion}, {"config_hash", tv.config_hash}, {"seed", seed},
          {"epsilon", tv.epsilon},           {"objective", tv.objective},     {"periodic", tv.periodic},
          {"slots", tv.num_slots()},         {"entries", std::move(entries)}};
}

/// Reads a stationary table written by table_to_json.
inline ForwardingTable table_from_json(const json& j, const SelfLoopView& view, const std::vector<PacketTypeSpec>& types) {
  ForwardingTable t(view.num_links(), types);
  try {
    t.epsilon = j.at("epsilon").get<double>();
    t.objective = j.at("objective").get<double>();
    t.config_hash = j.value("config_hash", "");
    for (const auto& e : j.at("entries")) {
      const auto jj = e.at("type").get<std::size_t>();
      const auto tail = view.base().find_node(e.at("link").at(0).get<std::string>());
      const auto head = view.base().find_node(e.at("link").at(1).get<std::string>());
      if (!tail || !head || jj >= types.size()) throw ConfigError("table entry references unknown type or node");
      std::optional<LinkId> id;
      if (*tail == *head) id = view.loop_of(*tail);
      else id = view.base().find_link(*tail, *head);
      if (!id) throw ConfigError("table entry references a missing link");
      const int age = e.at("age").get<int>();
      if (age < 0 || age > types[jj].deadline) throw ConfigError("table entry age outside the deadline");
      t.at(jj, *id, age) = e.at("value").get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("forwarding table: ") + e.what());
  }
  return t;
}

inline json routes_to_json(const std::vector<RouteDistribution>& dists, const SelfLoopView& view) {
  json out = json::array();
  for (std::size_t j = 0; j < dists.size(); ++j) {
    json routes = json::array();
    for (std::size_t k = 0; k < dists[j].routes.size(); ++k) {
      json links = json::array();
      for (auto id : dists[j].routes[k].links) links.push_back(link_json(view, id));
      routes.push_back({{"probability", dists[j].probabilities[k]}, {"links", std::move(links)}});
    }
    out.push_back({{"type", j}, {"drop", dists[j].drop}, {"routes", std::move(routes)}});
  }
  return out;
}

inline json counters_json(const TypeCounters& c) {
  return {{"arrived", c.arrived},
          {"admitted", c.admitted},
          {"delivered", c.delivered},
          {"dropped_admit", c.dropped_admit},
          {"dropped_capacity", c.dropped_capacity},
          {"dropped_zero_support", c.dropped_zero_support},
          {"expired", c.expired}};
}

inline json sim_result_to_json(const SimResult& r) {
  json per_type = json::array();
  for (const auto& c : r.counters) per_type.push_back(counters_json(c));
  json out = {{"schema_version", kSchemaVersion},
              {"config_hash", r.config_hash},
              {"seed", r.seed},
              {"scheduler", r.scheduler},
              {"horizon", r.horizon},
              {"slots_run", r.slots_run},
              {"reward", r.reward},
              {"counters", std::move(per_type)},
              {"link_usage", r.link_usage}};
  return out;
}

inline std::string sim_csv_header() {
  return "config_hash,seed,scheduler,reward,arrived,admitted,delivered,dropped_admit,dropped_capacity,"
         "dropped_zero_support,expired\n";
}

inline std::string sim_csv_row(const SimResult& r) {
  std::ostringstream os;
  os << r.config_hash << ',' << r.seed << ',' << r.scheduler << ',' << fmt(r.reward) << ','
     << r.total(&TypeCounters::arrived) << ',' << r.total(&TypeCounters::admitted) << ','
     << r.total(&TypeCounters::delivered) << ',' << r.total(&TypeCounters::dropped_admit) << ','
     << r.total(&TypeCounters::dropped_capacity) << ',' << r.total(&TypeCounters::dropped_zero_support) << ','
     << r.total(&TypeCounters::expired) << '\n';
  return os.str();
}

inline std::string schema_line(const std::string& hash, std::uint64_t seed) {
  return "# schema_version=" + std::to_string(kSchemaVersion) + " config_hash=" + hash + " seed=" + std::to_string(seed) +
         "\n";
}

/// One row per slot, one column per type.
inline std::string arrivals_to_csv(const ArrivalMatrix& m, const std::string& hash, std::uint64_t seed) {
  std::ostringstream os;
  os << schema_line(hash, seed) << "slot";
  for (std::size_t j = 0; j < m.types(); ++j) os << ",type" << j;
  os << '\n';
  for (std::size_t t = 0; t < m.slots(); ++t) {
    os << t;
    for (std::size_t j = 0; j < m.types(); ++j) os << ',' << m.at(t, j);
    os << '\n';
  }
  return os.str();
}

inline ArrivalMatrix arrivals_from_csv(std::istream& in) {
  std::string line;
  std::vector<std::vector<int>> rows;
  std::size_t width = 0;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      width = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
      continue;
    }
    const auto cells = dlsched::detail::split_csv(line);
    if (cells.size() != width + 1) throw ParseError("wrong number of columns", lineno);
    std::vector<int> row;
    for (std::size_t k = 1; k < cells.size(); ++k) {
      auto v = dlsched::detail::parse_number(cells[k]);
      if (!v || *v < 0) throw ParseError("bad arrival count '" + cells[k] + "'", lineno);
      row.push_back(static_cast<int>(*v));
    }
    rows.push_back(std::move(row));
  }
  ArrivalMatrix m(rows.size(), width);
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t j = 0; j < width; ++j) m.at(t, j) = rows[t][j];
  return m;
}

}  // namespace dlsched::io
