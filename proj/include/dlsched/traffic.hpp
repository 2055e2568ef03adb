#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "net_model.hpp"
#include "random.hpp"

namespace dlsched {

struct ArrivalProcess;

namespace process {
struct Bernoulli {
  double p = 0.0;
};
struct Binomial {
  int n = 1;
  double p = 0.0;
};
struct Poisson {
  double lambda = 0.0;
};
/// Value a with probability q, else 0.
struct ScaledBernoulli {
  int a = 1;
  double q = 0.0;
};
/// Per-slot rates, repeated cyclically past the end of the table.
struct TimeVarying {
  enum class Law { Bernoulli, Poisson };
  std::vector<double> rates;
  Law law = Law::Bernoulli;
};
struct Trace {
  std::vector<int> counts;
};
/// One draw of the base process per block of `block` slots, repeated.
struct BlockDependent {
  std::shared_ptr<const ArrivalProcess> base;
  int block = 1;
};
}  // namespace process

struct ArrivalProcess {
  using Variant = std::variant<process::Bernoulli, process::Binomial, process::Poisson, process::ScaledBernoulli,
                               process::TimeVarying, process::Trace, process::BlockDependent>;
  Variant v;

  ArrivalProcess() : v(process::Bernoulli{}) {}
  template <typename T>
  ArrivalProcess(T alt) : v(std::move(alt)) {}
};

inline ArrivalProcess block_dependent(ArrivalProcess base, int block) {
  return process::BlockDependent{std::make_shared<const ArrivalProcess>(std::move(base)), block};
}

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

inline void validate_process(const ArrivalProcess& proc) {
  auto bad = [](const std::string& what) { throw ConfigError("arrival process: " + what); };
  auto prob = [&](double p) {
    if (!(p >= 0.0 && p <= 1.0)) bad("probability outside [0, 1]");
  };
  std::visit(overloaded{
                 [&](const process::Bernoulli& b) { prob(b.p); },
                 [&](const process::Binomial& b) {
                   prob(b.p);
                   if (b.n < 0) bad("binomial n < 0");
                 },
                 [&](const process::Poisson& p) {
                   if (!(p.lambda >= 0.0 && std::isfinite(p.lambda))) bad("poisson rate must be finite and >= 0");
                 },
                 [&](const process::ScaledBernoulli& s) {
                   prob(s.q);
                   if (s.a < 0) bad("scaled bernoulli value < 0");
                 },
                 [&](const process::TimeVarying& tv) {
                   if (tv.rates.empty()) bad("empty rate table");
                   for (double r : tv.rates) {
                     if (!(r >= 0.0 && std::isfinite(r))) bad("rates must be finite and >= 0");
                     if (tv.law == process::TimeVarying::Law::Bernoulli && r > 1.0) bad("bernoulli rate above 1");
                   }
                 },
                 [&](const process::Trace& t) {
                   for (int c : t.counts)
                     if (c < 0) bad("negative trace count");
                 },
                 [&](const process::BlockDependent& b) {
                   if (b.block < 1) bad("block length < 1");
                   if (!b.base) bad("missing base process");
                   validate_process(*b.base);
                 },
             },
             proc.v);
}

/// Expected arrivals in slot t (0-based).
inline double mean_rate(const ArrivalProcess& proc, std::size_t t = 0) {
  return std::visit(overloaded{
                        [](const process::Bernoulli& b) { return b.p; },
                        [](const process::Binomial& b) { return b.n * b.p; },
                        [](const process::Poisson& p) { return p.lambda; },
                        [](const process::ScaledBernoulli& s) { return s.a * s.q; },
                        [&](const process::TimeVarying& tv) { return tv.rates[t % tv.rates.size()]; },
                        [&](const process::Trace& tr) {
                          return t < tr.counts.size() ? static_cast<double>(tr.counts[t]) : 0.0;
                        },
                        [&](const process::BlockDependent& b) { return mean_rate(*b.base, t); },
                    },
                    proc.v);
}

/// Long-run average rate.
inline double average_rate(const ArrivalProcess& proc) {
  if (auto* tv = std::get_if<process::TimeVarying>(&proc.v)) {
    double s = 0.0;
    for (double r : tv->rates) s += r;
    return s / static_cast<double>(tv->rates.size());
  }
  if (auto* tr = std::get_if<process::Trace>(&proc.v)) {
    if (tr->counts.empty()) return 0.0;
    double s = 0.0;
    for (int c : tr->counts) s += c;
    return s / static_cast<double>(tr->counts.size());
  }
  if (auto* b = std::get_if<process::BlockDependent>(&proc.v)) return average_rate(*b->base);
  return mean_rate(proc, 0);
}

/// Largest possible per-slot count; nullopt when unbounded.
inline std::optional<int> max_count(const ArrivalProcess& proc) {
  return std::visit(overloaded{
                        [](const process::Bernoulli&) -> std::optional<int> { return 1; },
                        [](const process::Binomial& b) -> std::optional<int> { return b.n; },
                        [](const process::Poisson&) -> std::optional<int> { return std::nullopt; },
                        [](const process::ScaledBernoulli& s) -> std::optional<int> { return s.a; },
                        [](const process::TimeVarying& tv) -> std::optional<int> {
                          if (tv.law == process::TimeVarying::Law::Bernoulli) return 1;
                          return std::nullopt;
                        },
                        [](const process::Trace& t) -> std::optional<int> {
                          int m = 0;
                          for (int c : t.counts) m = std::max(m, c);
                          return m;
                        },
                        [](const process::BlockDependent& b) { return max_count(*b.base); },
                    },
                    proc.v);
}

/// Dependency degree of the windowed arrival total. Poisson reports 1,
/// which is a heuristic (the decomposition argument needs bounded counts).
inline int dependency_degree(const ArrivalProcess& proc, int d_max) {
  return std::visit(overloaded{
                        [](const process::Bernoulli&) { return 1; },
                        [](const process::Binomial&) { return 1; },
                        [](const process::Poisson&) { return 1; },
                        [](const process::ScaledBernoulli& s) { return std::max(1, s.a); },
                        [](const process::TimeVarying&) { return 1; },
                        [](const process::Trace&) -> int {
                          throw UnknownDegree("trace-driven arrivals have no known dependency degree");
                        },
                        [&](const process::BlockDependent& b) {
                          return std::min(b.block, d_max + 1) * dependency_degree(*b.base, d_max);
                        },
                    },
                    proc.v);
}

/// counts[t][j] stored row-major.
class ArrivalMatrix {
 public:
  ArrivalMatrix() = default;
  ArrivalMatrix(std::size_t slots, std::size_t types) : slots_(slots), types_(types), counts_(slots * types, 0) {}

  std::size_t slots() const noexcept { return slots_; }
  std::size_t types() const noexcept { return types_; }
  int& at(std::size_t t, std::size_t j) { return counts_[t * types_ + j]; }
  int at(std::size_t t, std::size_t j) const { return counts_[t * types_ + j]; }
  /// Zero outside the stored horizon.
  int count(std::size_t t, std::size_t j) const { return t < slots_ ? counts_[t * types_ + j] : 0; }

  long total(std::size_t j) const {
    long s = 0;
    for (std::size_t t = 0; t < slots_; ++t) s += at(t, j);
    return s;
  }
  long total() const {
    long s = 0;
    for (int c : counts_) s += c;
    return s;
  }

  friend bool operator==(const ArrivalMatrix&, const ArrivalMatrix&) = default;

 private:
  std::size_t slots_ = 0;
  std::size_t types_ = 0;
  std::vector<int> counts_;
};

namespace detail {

inline int draw_once(const ArrivalProcess& proc, std::size_t t, Rng& rng) {
  return std::visit(overloaded{
                        [&](const process::Bernoulli& b) { return bernoulli(rng, b.p) ? 1 : 0; },
                        [&](const process::Binomial& b) {
                          std::binomial_distribution<int> dist(b.n, b.p);
                          return dist(rng);
                        },
                        [&](const process::Poisson& p) {
                          if (p.lambda <= 0.0) return 0;
                          std::poisson_distribution<int> dist(p.lambda);
                          return dist(rng);
                        },
                        [&](const process::ScaledBernoulli& s) { return bernoulli(rng, s.q) ? s.a : 0; },
                        [&](const process::TimeVarying& tv) {
                          const double r = tv.rates[t % tv.rates.size()];
                          if (tv.law == process::TimeVarying::Law::Bernoulli) return bernoulli(rng, r) ? 1 : 0;
                          if (r <= 0.0) return 0;
                          std::poisson_distribution<int> dist(r);
                          return dist(rng);
                        },
                        [&](const process::Trace& tr) { return t < tr.counts.size() ? tr.counts[t] : 0; },
                        [&](const process::BlockDependent&) -> int { throw Error("nested block draw"); },
                    },
                    proc.v);
}

}  // namespace detail

/// One independent stream per type; identical seeds give identical matrices.
inline ArrivalMatrix sample_arrivals(const std::vector<ArrivalProcess>& procs, std::size_t horizon,
                                     std::uint64_t seed) {
  ArrivalMatrix m(horizon, procs.size());
  for (std::size_t j = 0; j < procs.size(); ++j) {
    Rng rng(derive_seed(seed, stream::kArrivals, j));
    const auto& proc = procs[j];
    if (auto* b = std::get_if<process::BlockDependent>(&proc.v)) {
      int held = 0;
      for (std::size_t t = 0; t < horizon; ++t) {
        if (t % static_cast<std::size_t>(b->block) == 0) {
          const ArrivalProcess* base = b->base.get();
          while (auto* inner = std::get_if<process::BlockDependent>(&base->v)) base = inner->base.get();
          held = detail::draw_once(*base, t, rng);
        }
        m.at(t, j) = held;
      }
    } else {
      for (std::size_t t = 0; t < horizon; ++t) m.at(t, j) = detail::draw_once(proc, t, rng);
    }
  }
  return m;
}

struct RateEstimate {
  std::vector<double> lambda;
  double lambda_min = 0.0;
};

/// Empirical means over slots [begin, end); lambda_min is floored at 1/length.
inline RateEstimate estimate_rates(const ArrivalMatrix& m, std::size_t begin, std::size_t end) {
  end = std::min(end, m.slots());
  if (end <= begin) throw ConfigError("rate estimation needs at least one slot of history");
  const double len = static_cast<double>(end - begin);
  RateEstimate est;
  est.lambda.assign(m.types(), 0.0);
  for (std::size_t t = begin; t < end; ++t)
    for (std::size_t j = 0; j < m.types(); ++j) est.lambda[j] += m.at(t, j);
  double lo = std::numeric_limits<double>::infinity();
  for (auto& l : est.lambda) {
    l /= len;
    lo = std::min(lo, l);
  }
  if (m.types() == 0) lo = 0.0;
  est.lambda_min = std::max(lo, 1.0 / len);
  return est;
}

inline RateEstimate estimate_rates(const ArrivalMatrix& m) { return estimate_rates(m, 0, m.slots()); }

// --- trace ingestion ---------------------------------------------------------

struct TraceSpec {
  std::string path;
  double slot_ms = 1.0;
  std::uint64_t seed = 0;
  std::size_t top_k = 1;
  /// Slots kept; 0 derives the horizon from the last in-window timestamp.
  std::size_t horizon = 0;
  int deadline = 0;
  /// If > 0, keep a seeded random subset of this many of the top-K flows.
  std::size_t subset = 0;
};

struct TraceFlow {
  NodeId source;
  NodeId destination;
  long volume;
};

struct TraceIngest {
  std::vector<PacketTypeSpec> types;
  std::vector<TraceFlow> flows;
  ArrivalMatrix arrivals;
  std::size_t rows_read = 0;
  std::size_t rows_out_of_window = 0;
  std::size_t rows_same_node = 0;
  std::size_t rows_not_retained = 0;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace detail

struct TraceRow {
  double timestamp_ms;
  std::string src;
  std::string dst;
  long count;
  std::size_t line;
};

/// Parses the CSV body: timestamp_ms, src_key, dst_key[, count]. A first line
/// whose timestamp field is not numeric is taken as a header.
inline std::vector<TraceRow> parse_trace_csv(std::istream& in) {
  std::vector<TraceRow> rows;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto f = detail::split_csv(t);
    const auto ts = f.empty() ? std::nullopt : detail::parse_number(f[0]);
    if (first && !ts) {
      first = false;
      continue;
    }
    first = false;
    if (f.size() < 3 || f.size() > 4) throw ParseError("expected 3 or 4 comma-separated fields", lineno);
    if (!ts || !std::isfinite(*ts)) throw ParseError("timestamp is not a number", lineno);
    if (f[1].empty() || f[2].empty()) throw ParseError("empty source or destination key", lineno);
    long count = 1;
    if (f.size() == 4) {
      const auto c = detail::parse_number(f[3]);
      if (!c || *c < 0 || std::floor(*c) != *c) throw ParseError("count must be a nonnegative integer", lineno);
      count = static_cast<long>(*c);
    }
    rows.push_back({*ts, f[1], f[2], count, lineno});
  }
  return rows;
}

/// Node that a trace key hashes to under the given seed.
inline NodeId trace_key_node(const std::string& key, std::uint64_t seed, std::size_t num_nodes) {
  return static_cast<NodeId>(fnv1a(key, derive_seed(seed, stream::kTrace)) % num_nodes);
}

inline TraceIngest ingest_trace_rows(const std::vector<TraceRow>& rows, const TraceSpec& spec, const NetworkSpec& net) {
  if (!(spec.slot_ms > 0.0)) throw ConfigError("trace slot duration must be positive");
  if (spec.top_k < 1) throw ConfigError("trace top_k must be at least 1");
  if (net.num_nodes() < 2) throw ConfigError("trace ingestion needs at least two nodes");
  if (rows.empty()) throw EmptyTrace("trace contains no data rows");

  TraceIngest out;
  const auto n = net.num_nodes();
  std::size_t horizon = spec.horizon;
  if (horizon == 0) {
    double last = -1.0;
    for (const auto& r : rows)
      if (r.timestamp_ms >= 0.0) last = std::max(last, r.timestamp_ms);
    if (last < 0.0) throw EmptyTrace("trace has no rows with nonnegative timestamps");
    horizon = static_cast<std::size_t>(std::floor(last / spec.slot_ms)) + 1;
  }
  const double window = static_cast<double>(horizon) * spec.slot_ms;

  struct Bucketed {
    std::size_t pair;
    std::size_t slot;
    long count;
  };
  std::vector<Bucketed> kept;
  std::vector<long> volume(n * n, 0);
  for (const auto& r : rows) {
    ++out.rows_read;
    if (r.timestamp_ms < 0.0 || r.timestamp_ms >= window) {
      ++out.rows_out_of_window;
      continue;
    }
    const auto s = trace_key_node(r.src, spec.seed, n);
    const auto z = trace_key_node(r.dst, spec.seed, n);
    if (s == z) {
      ++out.rows_same_node;
      continue;
    }
    const auto pair = static_cast<std::size_t>(s) * n + z;
    const auto slot = static_cast<std::size_t>(std::floor(r.timestamp_ms / spec.slot_ms));
    kept.push_back({pair, slot, r.count});
    volume[pair] += r.count;
  }

  std::vector<std::size_t> pairs;
  for (std::size_t p = 0; p < volume.size(); ++p)
    if (volume[p] > 0) pairs.push_back(p);
  if (pairs.empty()) throw EmptyTrace("no trace traffic between distinct nodes inside the window");
  std::stable_sort(pairs.begin(), pairs.end(), [&](auto a, auto b) { return volume[a] > volume[b]; });
  if (pairs.size() > spec.top_k) pairs.resize(spec.top_k);

  if (spec.subset > 0 && spec.subset < pairs.size()) {
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(spec.seed, stream::kTrace, 1));
    shuffle(order, rng);
    order.resize(spec.subset);
    std::sort(order.begin(), order.end());
    std::vector<std::size_t> chosen;
    for (auto i : order) chosen.push_back(pairs[i]);
    pairs = std::move(chosen);
  }

  std::vector<long> type_of(n * n, -1);
  Rng wrng(derive_seed(spec.seed, stream::kTrace, 2));
  for (std::size_t j = 0; j < pairs.size(); ++j) {
    type_of[pairs[j]] = static_cast<long>(j);
    const auto s = static_cast<NodeId>(pairs[j] / n);
    const auto z = static_cast<NodeId>(pairs[j] % n);
    double w = 0.0;
    while (w <= 0.0) w = uniform01(wrng);
    out.types.push_back({s, z, spec.deadline, w});
    out.flows.push_back({s, z, volume[pairs[j]]});
  }
  out.arrivals = ArrivalMatrix(horizon, pairs.size());
  for (const auto& b : kept) {
    const auto j = type_of[b.pair];
    if (j < 0) {
      ++out.rows_not_retained;
      continue;
    }
    out.arrivals.at(b.slot, static_cast<std::size_t>(j)) += static_cast<int>(b.count);
  }
  return out;
}

inline TraceIngest ingest_trace(const TraceSpec& spec, const NetworkSpec& net) {
  std::ifstream in(spec.path);
  if (!in) throw ConfigError("cannot open trace file '" + spec.path + "'");
  return ingest_trace_rows(parse_trace_csv(in), spec, net);
}

/// Trace processes, one per column of an arrival matrix.
inline std::vector<ArrivalProcess> trace_processes(const ArrivalMatrix& m) {
  std::vector<ArrivalProcess> procs;
  for (std::size_t j = 0; j < m.types(); ++j) {
    process::Trace tr;
    for (std::size_t t = 0; t < m.slots(); ++t) tr.counts.push_back(m.at(t, j));
    procs.emplace_back(std::move(tr));
  }
  return procs;
}

}  // namespace dlsched
