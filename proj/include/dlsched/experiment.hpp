#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "io.hpp"
#include "lp/builders.hpp"
#include "net_model.hpp"
#include "oracle.hpp"
#include "random.hpp"
#include "schedulers.hpp"
#include "sim_engine.hpp"
#include "traffic.hpp"

namespace dlsched {

using nlohmann::json;

/// Random packet types: endpoints uniform over distinct node pairs, rate and
/// weight uniform in their ranges.
struct GeneratorSpec {
  std::size_t count = 0;
  double rate_lo = 0.0;
  double rate_hi = 1.0;
  double weight_lo = 0.0;
  double weight_hi = 1.0;
  int deadline = 1;
  std::uint64_t seed = 0;
};

enum class TrafficKind { Bernoulli, Binomial, Poisson, ScaledBernoulli, Trace };

struct TrafficSpec {
  TrafficKind kind = TrafficKind::Poisson;
  /// Binomial trials and ScaledBernoulli burst size.
  int scale = 1;
  /// > 1 holds each draw for this many slots.
  int block = 1;
  /// Arrival-matrix CSV for kind Trace.
  std::string path;
};

enum class SchedulerKind { Fbpf, DlpfExp, DlpfFixed, GlsFp };

struct SchedulerSpec {
  SchedulerKind kind = SchedulerKind::Fbpf;
  double epsilon = 0.1;
  DlpfOptions dlpf;
};

enum class SweepAxis { Capacity, CapacityTraffic, Distribution };

struct SweepSpec {
  SweepAxis axis = SweepAxis::Capacity;
  /// Capacity: C. CapacityTraffic: [C, J]. Distribution: traffic kind name.
  std::vector<json> values;
};

struct ExperimentConfig {
  json raw;
  std::string hash;
  std::filesystem::path base_dir;
  NetworkSpec network;
  std::optional<int> capacity;
  std::vector<PacketTypeSpec> types;
  std::vector<double> rates;
  std::optional<GeneratorSpec> generator;
  TrafficSpec traffic;
  std::vector<SchedulerSpec> schedulers;
  long horizon = 0;
  std::vector<std::uint64_t> seeds;
  std::string out = "out";
  double epsilon = 0.1;
  std::optional<SweepSpec> sweep;
  std::optional<TraceSpec> trace;
  std::size_t realizations = 200;
  /// Arrival matrix for trace traffic, loaded once.
  std::shared_ptr<const ArrivalMatrix> trace_arrivals;
};

inline TrafficKind traffic_kind_from(const std::string& s) {
  if (s == "bernoulli") return TrafficKind::Bernoulli;
  if (s == "binomial") return TrafficKind::Binomial;
  if (s == "poisson") return TrafficKind::Poisson;
  if (s == "scaled_bernoulli") return TrafficKind::ScaledBernoulli;
  if (s == "trace") return TrafficKind::Trace;
  throw ConfigError("unknown traffic kind '" + s + "'");
}

inline std::string traffic_kind_name(TrafficKind k) {
  switch (k) {
    case TrafficKind::Bernoulli: return "bernoulli";
    case TrafficKind::Binomial: return "binomial";
    case TrafficKind::Poisson: return "poisson";
    case TrafficKind::ScaledBernoulli: return "scaled_bernoulli";
    case TrafficKind::Trace: return "trace";
  }
  return "?";
}

inline SchedulerSpec scheduler_from_json(const json& j, double default_eps) {
  SchedulerSpec s;
  const auto kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
  const json opts = j.is_object() ? j : json::object();
  s.epsilon = opts.value("epsilon", default_eps);
  s.dlpf.epsilon = s.epsilon;
  s.dlpf.zeta = opts.value("zeta", 0.0);
  const auto warm = opts.value("warmup", std::string("glsfp"));
  if (warm == "idle") s.dlpf.warmup = Warmup::Idle;
  else if (warm == "glsfp") s.dlpf.warmup = Warmup::GlsFp;
  else throw ConfigError("unknown warmup '" + warm + "'");
  s.dlpf.sliding_window = opts.value("sliding_window", false);
  if (kind == "FBPF") s.kind = SchedulerKind::Fbpf;
  else if (kind == "DLPF-EXP") s.kind = SchedulerKind::DlpfExp;
  else if (kind == "GLS-FP") s.kind = SchedulerKind::GlsFp;
  else if (kind.rfind("DLPF-", 0) == 0) {
    s.kind = SchedulerKind::DlpfFixed;
    s.dlpf.phase_len = opts.value("phase_len", 0L);
    const auto tail = kind.substr(5);
    if (s.dlpf.phase_len == 0 && tail != "FIXED") {
      try {
        s.dlpf.phase_len = std::stol(tail);
      } catch (const std::exception&) {
        throw ConfigError("unknown scheduler '" + kind + "'");
      }
    }
    if (s.dlpf.phase_len < 1) throw ConfigError("DLPF-FIXED needs phase_len >= 1");
  } else {
    throw ConfigError("unknown scheduler '" + kind + "'");
  }
  if (!(s.epsilon >= 0.0 && s.epsilon < 1.0)) throw ConfigError("scheduler eps must lie in [0, 1)");
  return s;
}

inline std::string scheduler_label(const SchedulerSpec& s) {
  switch (s.kind) {
    case SchedulerKind::Fbpf: return "FBPF";
    case SchedulerKind::DlpfExp: return "DLPF-EXP";
    case SchedulerKind::DlpfFixed: return "DLPF-" + std::to_string(s.dlpf.phase_len);
    case SchedulerKind::GlsFp: return "GLS-FP";
  }
  return "?";
}

/// Types and rates for a generator spec; the draw depends only on its seed.
inline void generate_types(const GeneratorSpec& g, const NetworkSpec& net, std::vector<PacketTypeSpec>& types,
                           std::vector<double>& rates) {
  if (net.num_nodes() < 2) throw ConfigError("type generator needs at least two nodes");
  if (!(g.rate_lo >= 0.0 && g.rate_hi >= g.rate_lo)) throw ConfigError("generator rate range is invalid");
  if (!(g.weight_lo >= 0.0 && g.weight_hi >= g.weight_lo)) throw ConfigError("generator weight range is invalid");
  Rng rng(derive_seed(g.seed, stream::kGenerator));
  types.clear();
  rates.clear();
  const auto n = net.num_nodes();
  for (std::size_t j = 0; j < g.count; ++j) {
    const auto s = static_cast<NodeId>(uniform_index(rng, n));
    auto z = static_cast<NodeId>(uniform_index(rng, n - 1));
    if (z >= s) ++z;
    const double w = uniform(rng, g.weight_lo, g.weight_hi);
    const double r = uniform(rng, g.rate_lo, g.rate_hi);
    types.push_back({s, z, g.deadline, w});
    rates.push_back(r);
  }
}

inline std::vector<std::uint64_t> parse_seeds(const json& j) {
  std::vector<std::uint64_t> seeds;
  if (j.is_number_integer()) {
    const auto n = j.get<long>();
    if (n < 1) throw ConfigError("seed count must be at least 1");
    for (long s = 0; s < n; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  } else {
    for (const auto& s : j) seeds.push_back(s.get<std::uint64_t>());
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

/// "5" means seeds 0..4; "1,7,9" is an explicit list.
inline std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  if (s.find(',') == std::string::npos) {
    long n = 0;
    try {
      n = std::stol(s);
    } catch (const std::exception&) {
      throw ConfigError("bad --seeds value '" + s + "'");
    }
    return parse_seeds(json(n));
  }
  json list = json::array();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      list.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw ConfigError("bad seed '" + item + "'");
    }
  }
  return parse_seeds(list);
}

inline void load_trace_arrivals(ExperimentConfig& c) {
  const auto path = c.base_dir / c.traffic.path;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open arrivals file '" + path.string() + "'");
  auto m = io::arrivals_from_csv(in);
  if (m.types() != c.types.size()) throw ConfigMismatch("arrival file columns do not match the packet types");
  if (c.horizon == 0) c.horizon = static_cast<long>(m.slots());
  if (static_cast<long>(m.slots()) < c.horizon) throw ConfigMismatch("arrival file shorter than the horizon");
  c.rates = estimate_rates(m, 0, static_cast<std::size_t>(c.horizon)).lambda;
  c.trace_arrivals = std::make_shared<const ArrivalMatrix>(std::move(m));
}

inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir = ".") {
  ExperimentConfig c;
  c.raw = j;
  c.hash = io::config_hash(j);
  c.base_dir = base_dir;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    const int version = j.value("schema_version", 0);
    if (version != io::kSchemaVersion)
      throw ConfigError("unsupported schema_version " + std::to_string(version) + ", expected " +
                        std::to_string(io::kSchemaVersion));
    const auto& net = j.at("network");
    if (net.is_string()) c.network = network_from_json(io::read_json(base_dir / net.get<std::string>()));
    else c.network = network_from_json(net);
    if (j.contains("capacity")) {
      c.capacity = j.at("capacity").get<int>();
      c.network = c.network.with_uniform_capacity(*c.capacity);
    }
    c.epsilon = j.value("epsilon", 0.1);
    if (!(c.epsilon >= 0.0 && c.epsilon < 1.0)) throw ConfigError("eps must lie in [0, 1)");
    c.horizon = j.value("horizon", 0L);
    c.out = j.value("out", std::string("out"));
    c.realizations = j.value("realizations", std::size_t{200});
    c.seeds = parse_seeds(j.value("seeds", json(1)));

    if (j.contains("traffic")) {
      const auto& t = j.at("traffic");
      c.traffic.kind = traffic_kind_from(t.at("kind").get<std::string>());
      c.traffic.scale = t.value("scale", 1);
      c.traffic.block = t.value("block", 1);
      c.traffic.path = t.value("path", std::string());
      if (c.traffic.scale < 1 || c.traffic.block < 1) throw ConfigError("traffic scale and block must be >= 1");
    }
    if (j.contains("types")) {
      // A string names a file written by the trace command.
      const json types = j.at("types").is_string() ? io::read_json(base_dir / j.at("types").get<std::string>()).at("types")
                                                   : j.at("types");
      c.types = io::types_from_json(types, c.network);
      if (c.traffic.kind != TrafficKind::Trace) {
        for (const auto& t : types) c.rates.push_back(t.at("rate").get<double>());
      }
    } else if (j.contains("generator")) {
      const auto& g = j.at("generator");
      GeneratorSpec gs;
      gs.count = g.at("count").get<std::size_t>();
      gs.rate_lo = g.at("rate").at(0).get<double>();
      gs.rate_hi = g.at("rate").at(1).get<double>();
      gs.weight_lo = g.value("weight", json::array({0.0, 1.0})).at(0).get<double>();
      gs.weight_hi = g.value("weight", json::array({0.0, 1.0})).at(1).get<double>();
      gs.deadline = g.at("deadline").get<int>();
      gs.seed = g.value("seed", std::uint64_t{0});
      c.generator = gs;
      generate_types(gs, c.network, c.types, c.rates);
    } else if (!j.contains("trace")) {
      throw ConfigError("config needs 'types' or 'generator'");
    }
    for (double r : c.rates)
      if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("arrival rates must be nonnegative");
    if (c.traffic.kind == TrafficKind::Trace && !c.types.empty()) load_trace_arrivals(c);

    if (j.contains("schedulers"))
      for (const auto& s : j.at("schedulers")) c.schedulers.push_back(scheduler_from_json(s, c.epsilon));

    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      SweepSpec sw;
      const auto axis = s.at("axis").get<std::string>();
      if (axis == "capacity") sw.axis = SweepAxis::Capacity;
      else if (axis == "capacity+traffic") sw.axis = SweepAxis::CapacityTraffic;
      else if (axis == "distribution") sw.axis = SweepAxis::Distribution;
      else throw ConfigError("unknown sweep axis '" + axis + "'");
      for (const auto& v : s.at("values")) sw.values.push_back(v);
      if (sw.values.empty()) throw ConfigError("sweep needs at least one value");
      c.sweep = sw;
    }
    if (j.contains("trace")) {
      const auto& t = j.at("trace");
      TraceSpec ts;
      ts.path = (base_dir / t.at("path").get<std::string>()).string();
      ts.slot_ms = t.value("slot_ms", 1.0);
      ts.seed = t.value("seed", std::uint64_t{0});
      ts.top_k = t.value("top_k", std::size_t{1});
      ts.horizon = t.value("horizon", std::size_t{0});
      ts.deadline = t.value("deadline", 0);
      ts.subset = t.value("subset", std::size_t{0});
      c.trace = ts;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.rates.size() != c.types.size() && !c.types.empty())
    throw ConfigMismatch("every packet type needs an arrival rate");
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_json(path), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

inline ArrivalProcess make_process(const TrafficSpec& t, double rate) {
  ArrivalProcess p;
  switch (t.kind) {
    case TrafficKind::Bernoulli:
      if (rate > 1.0) throw ConfigError("Bernoulli traffic needs rates <= 1");
      p = process::Bernoulli{rate};
      break;
    case TrafficKind::Binomial:
      if (rate > t.scale) throw ConfigError("Binomial traffic needs rate <= scale");
      p = process::Binomial{t.scale, rate / t.scale};
      break;
    case TrafficKind::Poisson: p = process::Poisson{rate}; break;
    case TrafficKind::ScaledBernoulli:
      if (rate > t.scale) throw ConfigError("ScaledBernoulli traffic needs rate <= scale");
      p = process::ScaledBernoulli{t.scale, rate / t.scale};
      break;
    case TrafficKind::Trace: throw ConfigError("trace traffic has no parametric process");
  }
  if (t.block > 1) p = block_dependent(std::move(p), t.block);
  validate_process(p);
  return p;
}

inline std::vector<ArrivalProcess> make_processes(const TrafficSpec& t, const std::vector<double>& rates) {
  std::vector<ArrivalProcess> procs;
  for (double r : rates) procs.push_back(make_process(t, r));
  return procs;
}

/// Arrivals of one seeded realization.
inline ArrivalMatrix realize_arrivals(const ExperimentConfig& c, std::uint64_t seed) {
  if (c.traffic.kind == TrafficKind::Trace) {
    if (!c.trace_arrivals) throw ConfigError("trace traffic without an arrival file");
    return *c.trace_arrivals;
  }
  return sample_arrivals(make_processes(c.traffic, c.rates), static_cast<std::size_t>(c.horizon), seed);
}

/// FBPF solves its table from the configured rates; DLPF learns them online.
inline std::unique_ptr<Scheduler> make_scheduler(const SchedulerSpec& s, const SelfLoopView& view,
                                                 const std::vector<PacketTypeSpec>& types,
                                                 const std::vector<double>& rates) {
  switch (s.kind) {
    case SchedulerKind::Fbpf: return std::make_unique<FbpfScheduler>(lp::solve_fs(view, types, rates, s.epsilon), view, types);
    case SchedulerKind::DlpfExp: {
      auto o = s.dlpf;
      o.phase_len = 0;
      return std::make_unique<DlpfScheduler>(o, view, types);
    }
    case SchedulerKind::DlpfFixed: return std::make_unique<DlpfScheduler>(s.dlpf, view, types);
    case SchedulerKind::GlsFp: return std::make_unique<GlsFpScheduler>();
  }
  throw ConfigError("unknown scheduler kind");
}

/// Upper bound on the expected optimum from the eps = 0 stationary program.
inline double expected_upper_bound(const SelfLoopView& view, const std::vector<PacketTypeSpec>& types,
                                   const std::vector<double>& rates, long horizon) {
  const double w = lp::solve_fs(view, types, rates, 0.0).objective;
  return lp::upper_bound_expected_optimal(w, horizon, max_deadline(types));
}

struct SchedulerSummary {
  std::string scheduler;
  std::vector<std::uint64_t> seeds;
  std::vector<double> rewards;
  std::vector<double> ratios;
  double mean_reward = 0.0;
  double mean_ratio = 0.0;
  /// Half-width of the normal 95% interval of the mean ratio.
  double ci95 = 0.0;
  std::string error;
  std::exception_ptr failure;
};

inline void summarize(SchedulerSummary& s) {
  const auto n = static_cast<double>(s.rewards.size());
  if (n == 0) return;
  double sr = 0.0, sq = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < s.rewards.size(); ++i) {
    sr += s.rewards[i];
    sq += s.ratios[i];
  }
  s.mean_reward = sr / n;
  s.mean_ratio = sq / n;
  for (double r : s.ratios) ss += (r - s.mean_ratio) * (r - s.mean_ratio);
  s.ci95 = n > 1 ? 1.96 * std::sqrt(ss / (n - 1.0) / n) : 0.0;
}

/// Runs `tasks` jobs on up to `jobs` threads; fn(i) must only touch slot i.
template <class Fn>
void parallel_for(std::size_t tasks, unsigned jobs, Fn fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(tasks)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < tasks; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

struct PointResult {
  double upper_bound = 0.0;
  std::vector<SchedulerSummary> schedulers;
  std::vector<SimResult> runs;
};

/// Every configured scheduler on every seed at the current point.
inline PointResult run_point(const ExperimentConfig& c, unsigned jobs = 1) {
  if (c.schedulers.empty()) throw ConfigError("no schedulers configured");
  if (c.horizon < 1) throw ConfigError("horizon must be positive");
  const SelfLoopView view(c.network);
  PointResult out;
  out.upper_bound = expected_upper_bound(view, c.types, c.rates, c.horizon);
  const auto ns = c.schedulers.size();
  const auto nseeds = c.seeds.size();
  out.runs.resize(ns * nseeds);
  std::vector<std::exception_ptr> errors(ns * nseeds);
  parallel_for(ns * nseeds, jobs, [&](std::size_t i) {
    const auto& spec = c.schedulers[i / nseeds];
    const auto seed = c.seeds[i % nseeds];
    try {
      const auto arrivals = realize_arrivals(c, seed);
      auto sched = make_scheduler(spec, view, c.types, c.rates);
      auto r = run_simulation(view, c.types, arrivals, *sched, c.horizon, seed);
      r.config_hash = c.hash;
      out.runs[i] = std::move(r);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (std::size_t k = 0; k < ns; ++k) {
    SchedulerSummary s;
    s.scheduler = scheduler_label(c.schedulers[k]);
    for (std::size_t i = 0; i < nseeds; ++i) {
      const auto idx = k * nseeds + i;
      if (errors[idx]) {
        if (!s.failure) {
          s.failure = errors[idx];
          try {
            std::rethrow_exception(errors[idx]);
          } catch (const std::exception& e) {
            s.error = e.what();
          }
        }
        continue;
      }
      s.seeds.push_back(c.seeds[i]);
      s.rewards.push_back(out.runs[idx].reward);
      s.ratios.push_back(approx_ratio(out.runs[idx].reward, out.upper_bound).ratio);
    }
    summarize(s);
    out.schedulers.push_back(std::move(s));
  }
  return out;
}

/// Copy of the config moved to one sweep point.
inline ExperimentConfig at_sweep_point(const ExperimentConfig& base, const json& value) {
  ExperimentConfig c = base;
  const auto& sw = *base.sweep;
  switch (sw.axis) {
    case SweepAxis::Capacity: c.network = base.network.with_uniform_capacity(value.get<int>()); break;
    case SweepAxis::CapacityTraffic: {
      c.network = base.network.with_uniform_capacity(value.at(0).get<int>());
      if (!base.generator) throw ConfigError("capacity+traffic sweep needs a type generator");
      auto g = *base.generator;
      g.count = value.at(1).get<std::size_t>();
      c.generator = g;
      generate_types(g, c.network, c.types, c.rates);
      break;
    }
    case SweepAxis::Distribution: c.traffic.kind = traffic_kind_from(value.get<std::string>()); break;
  }
  return c;
}

/// Label of a sweep point in CSV output.
inline std::string sweep_label(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_array()) {
    std::string s;
    for (const auto& v : value) s += (s.empty() ? "" : ":") + v.dump();
    return s;
  }
  return value.dump();
}

struct SweepRow {
  std::string axis_value;
  SchedulerSummary summary;
};

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& c, unsigned jobs = 1) {
  if (!c.sweep) throw ConfigError("config has no sweep section");
  std::vector<SweepRow> rows;
  for (const auto& v : c.sweep->values) {
    const auto label = sweep_label(v);
    try {
      const auto point = run_point(at_sweep_point(c, v), jobs);
      for (const auto& s : point.schedulers) rows.push_back({label, s});
    } catch (const SolverFailure& e) {
      for (const auto& spec : c.schedulers) {
        SchedulerSummary s;
        s.scheduler = scheduler_label(spec);
        s.error = e.what();
        rows.push_back({label, s});
      }
    }
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows, const ExperimentConfig& c) {
  std::ostringstream os;
  os << "# schema_version=" << io::kSchemaVersion << " config_hash=" << c.hash << " seeds=";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) os << (i ? ";" : "") << c.seeds[i];
  os << '\n' << "axis_value,scheduler,seeds,mean_reward,mean_ratio,ci95\n";
  for (const auto& r : rows) {
    os << r.axis_value << ',' << r.summary.scheduler << ',' << r.summary.rewards.size() << ',';
    if (!r.summary.error.empty() && r.summary.rewards.empty()) os << "nan,nan,nan\n";
    else
      os << io::fmt(r.summary.mean_reward) << ',' << io::fmt(r.summary.mean_ratio) << ',' << io::fmt(r.summary.ci95)
         << '\n';
  }
  return os.str();
}

}  // namespace dlsched
