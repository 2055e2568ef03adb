#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dlsched/dlsched.hpp"

namespace fs = std::filesystem;
using namespace dlsched;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kSolver = 3, kOracle = 4 };

struct Common {
  std::string config;
  std::string out;
  std::string seeds;
  std::string scheduler;
  std::string axis;
  double eps = -1.0;
  unsigned jobs = 1;
};

/// Loads the config and folds command-line overrides into it before hashing,
/// so the hash identifies what actually ran.
ExperimentConfig load(const Common& o) {
  const fs::path path(o.config);
  json j = io::read_json(path);
  if (o.eps >= 0.0) {
    j["epsilon"] = o.eps;
    if (j.contains("schedulers"))
      for (auto& s : j["schedulers"])
        if (s.is_object()) s["epsilon"] = o.eps;
  }
  if (!o.seeds.empty()) {
    json list = json::array();
    for (auto s : parse_seeds(o.seeds)) list.push_back(s);
    j["seeds"] = list;
  }
  if (!o.scheduler.empty()) j["schedulers"] = json::array({o.scheduler});
  if (!o.axis.empty()) {
    if (!j.contains("sweep")) throw ConfigError("--axis needs a sweep section with values");
    j["sweep"]["axis"] = o.axis;
  }
  return parse_config(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

fs::path out_dir(const Common& o, const ExperimentConfig& c) { return o.out.empty() ? fs::path(c.out) : fs::path(o.out); }

int cmd_solve(const Common& o, const std::string& program, std::size_t period) {
  const auto c = load(o);
  const SelfLoopView view(c.network);
  const auto dir = out_dir(o, c);
  const std::uint64_t seed = c.seeds.front();
  json summary = {{"schema_version", io::kSchemaVersion}, {"config_hash", c.hash}, {"seed", seed},
                  {"program", program},                   {"epsilon", c.epsilon}};
  if (program == "fs") {
    auto table = lp::solve_fs(view, c.types, c.rates, c.epsilon);
    table.config_hash = c.hash;
    std::vector<RouteDistribution> dists;
    for (std::size_t j = 0; j < c.types.size(); ++j) dists.push_back(decompose(table, view, c.types[j], j));
    json routes = {{"schema_version", io::kSchemaVersion}, {"config_hash", c.hash}, {"seed", seed},
                   {"types", io::routes_to_json(dists, view)}};
    io::write_json(dir / "table.json", io::table_to_json(table, view, seed));
    io::write_json(dir / "routes.json", routes);
    json loads = json::array();
    const auto l = link_loads(table, c.rates);
    for (LinkId id = 0; id < view.num_real_links(); ++id)
      loads.push_back({{"link", io::link_json(view, id)}, {"load", l[id]}});
    summary["objective"] = table.objective;
    summary["link_loads"] = loads;
    std::cout << "W_FS(eps=" << io::fmt(c.epsilon) << ") = " << io::fmt(table.objective) << "\n";
  } else if (program == "fns" || program == "fnsp") {
    if (c.horizon < 1) throw ConfigError("time-indexed programs need a positive horizon");
    const auto rates = stationary_rate_table(c.rates, static_cast<std::size_t>(c.horizon));
    auto tv = program == "fns" ? lp::solve_fns(view, c.types, rates, static_cast<std::size_t>(c.horizon), c.epsilon)
                               : lp::solve_fnsp(view, c.types, rates, period, c.epsilon);
    tv.config_hash = c.hash;
    io::write_json(dir / "table.json", io::tv_table_to_json(tv, view, seed));
    summary["objective"] = tv.objective;
    std::cout << (program == "fns" ? "W_FNS" : "W_FNSP") << "(eps=" << io::fmt(c.epsilon)
              << ") = " << io::fmt(tv.objective) << "\n";
  } else {
    throw ConfigError("unknown program '" + program + "'");
  }
  if (c.horizon > 0) {
    try {
      const double ub = expected_upper_bound(view, c.types, c.rates, c.horizon);
      summary["upper_bound"] = ub;
      std::cout << "upper bound on E[W_RI*] over T=" << c.horizon << ": " << io::fmt(ub) << "\n";
    } catch (const HorizonTooShort& e) {
      summary["upper_bound"] = nullptr;
      std::cout << "upper bound unavailable: " << e.what() << "\n";
    }
  }
  io::write_json(dir / "solve.json", summary);
  return kOk;
}

int cmd_simulate(const Common& o) {
  const auto c = load(o);
  if (c.schedulers.empty()) throw ConfigError("no scheduler configured; use --scheduler");
  const auto dir = out_dir(o, c);
  const auto point = run_point(c, o.jobs);
  std::string csv = io::schema_line(c.hash, c.seeds.front()) + io::sim_csv_header();
  const auto nseeds = c.seeds.size();
  for (std::size_t k = 0; k < point.schedulers.size(); ++k) {
    if (point.schedulers[k].failure) std::rethrow_exception(point.schedulers[k].failure);
    for (std::size_t i = 0; i < nseeds; ++i) {
      const auto& r = point.runs[k * nseeds + i];
      csv += io::sim_csv_row(r);
      auto j = io::sim_result_to_json(r);
      j["upper_bound"] = point.upper_bound;
      j["ratio"] = approx_ratio(r.reward, point.upper_bound).ratio;
      io::write_json(dir / ("run_" + r.scheduler + "_" + std::to_string(r.seed) + ".json"), j);
    }
    const auto& s = point.schedulers[k];
    std::cout << s.scheduler << ": mean reward " << io::fmt(s.mean_reward) << ", mean ratio " << io::fmt(s.mean_ratio)
              << " over " << s.rewards.size() << " seed(s)\n";
  }
  io::write_text(dir / "runs.csv", csv);
  return kOk;
}

int cmd_compare(const Common& o) {
  const auto c = load(o);
  const auto dir = out_dir(o, c);
  const auto point = run_point(c, o.jobs);
  std::vector<SweepRow> rows;
  for (const auto& s : point.schedulers) rows.push_back({"point", s});
  io::write_text(dir / "compare.csv", sweep_csv(rows, c));
  std::cout << "upper bound " << io::fmt(point.upper_bound) << "\n";
  for (const auto& s : point.schedulers) {
    std::cout << s.scheduler << ": ratio " << io::fmt(s.mean_ratio) << " +- " << io::fmt(s.ci95);
    if (!s.error.empty()) std::cout << " (error: " << s.error << ")";
    std::cout << "\n";
  }
  return kOk;
}

int cmd_sweep(const Common& o) {
  const auto c = load(o);
  const auto dir = out_dir(o, c);
  const auto rows = run_sweep(c, o.jobs);
  io::write_text(dir / "sweep.csv", sweep_csv(rows, c));
  for (const auto& r : rows) {
    std::cout << r.axis_value << " " << r.summary.scheduler << " ratio " << io::fmt(r.summary.mean_ratio);
    if (!r.summary.error.empty()) std::cout << " (failed: " << r.summary.error << ")";
    std::cout << "\n";
  }
  return kOk;
}

int cmd_trace(const Common& o) {
  const auto c = load(o);
  if (!c.trace) throw ConfigError("config has no trace section");
  const auto dir = out_dir(o, c);
  const auto ingest = ingest_trace(*c.trace, c.network);
  io::write_text(dir / "trace_arrivals.csv", io::arrivals_to_csv(ingest.arrivals, c.hash, c.trace->seed));
  json types = io::types_to_json(ingest.types, c.network);
  json flows = json::array();
  for (std::size_t j = 0; j < ingest.flows.size(); ++j) {
    const auto& f = ingest.flows[j];
    flows.push_back({{"type", j},
                     {"source", c.network.node_name(f.source)},
                     {"destination", c.network.node_name(f.destination)},
                     {"volume", f.volume}});
    std::cout << "type " << j << ": " << c.network.node_name(f.source) << " -> " << c.network.node_name(f.destination)
              << " volume " << f.volume << "\n";
  }
  io::write_json(dir / "trace_types.json", {{"schema_version", io::kSchemaVersion},
                                            {"config_hash", c.hash},
                                            {"seed", c.trace->seed},
                                            {"slots", ingest.arrivals.slots()},
                                            {"rows_read", ingest.rows_read},
                                            {"rows_out_of_window", ingest.rows_out_of_window},
                                            {"rows_same_node", ingest.rows_same_node},
                                            {"rows_not_retained", ingest.rows_not_retained},
                                            {"types", types},
                                            {"flows", flows}});
  return kOk;
}

int cmd_oracle(const Common& o) {
  auto c = load(o);
  const SelfLoopView view(c.network);
  const auto dir = out_dir(o, c);
  if (c.horizon < 1) throw ConfigError("oracle needs a positive horizon");
  const auto T = static_cast<std::size_t>(c.horizon);
  // A fixed arrival file is its own expected instance.
  RateTable rates = stationary_rate_table(c.rates, T);
  if (c.trace_arrivals)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < c.types.size(); ++j) rates[t][j] = c.trace_arrivals->count(t, j);
  const double w_ei = lp::solve(lp::build_ei(view, c.types, rates, T)).objective;
  const auto table = lp::solve_fs(view, c.types, c.rates, c.epsilon);

  std::vector<std::uint64_t> seeds = c.seeds;
  if (o.seeds.empty() && !c.raw.contains("seeds")) {
    seeds.clear();
    for (std::size_t s = 0; s < c.realizations; ++s) seeds.push_back(s);
  }
  json rows = json::array();
  double sum = 0.0, sumsq = 0.0, fb_sum = 0.0, gl_sum = 0.0;
  bool dominated = true;
  for (auto seed : seeds) {
    const auto arrivals = realize_arrivals(c, seed);
    TinyInstance inst{view, c.types, arrivals, c.horizon};
    const auto opt = brute_force_optimal(inst);
    FbpfScheduler fb(table, view, c.types);
    GlsFpScheduler gl;
    const double rf = run_simulation(view, c.types, arrivals, fb, c.horizon, seed).reward;
    const double rg = run_simulation(view, c.types, arrivals, gl, c.horizon, seed).reward;
    const bool ok = rf <= opt.reward + 1e-9 && rg <= opt.reward + 1e-9;
    dominated = dominated && ok;
    sum += opt.reward;
    sumsq += opt.reward * opt.reward;
    fb_sum += rf;
    gl_sum += rg;
    rows.push_back({{"seed", seed}, {"packets", opt.packets.size()}, {"optimum", opt.reward}, {"FBPF", rf},
                    {"GLS-FP", rg}, {"dominated", ok}});
  }
  const double n = static_cast<double>(seeds.size());
  const double mean = sum / n;
  const double se = n > 1 ? std::sqrt(std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0)) / n) : 0.0;
  json report = {{"schema_version", io::kSchemaVersion},
                 {"config_hash", c.hash},
                 {"seeds", seeds},
                 {"w_ei", w_ei},
                 {"mean_optimum", mean},
                 {"standard_error", se},
                 {"w_ei_dominates", w_ei >= mean - 2.576 * se - lp::kObjectiveRelTol * std::max(1.0, mean)},
                 {"policies_dominated", dominated},
                 {"ratio_vs_w_ei", {{"FBPF", w_ei > 0 ? fb_sum / n / w_ei : 0.0}, {"GLS-FP", w_ei > 0 ? gl_sum / n / w_ei : 0.0}}},
                 {"realizations", rows}};
  try {
    report["upper_bound"] = expected_upper_bound(view, c.types, c.rates, c.horizon);
  } catch (const HorizonTooShort&) {
    report["upper_bound"] = nullptr;
  }
  io::write_json(dir / "oracle.json", report);
  std::cout << "mean brute-force optimum " << io::fmt(mean) << " (se " << io::fmt(se) << ") over " << seeds.size()
            << " realization(s)\n"
            << "W_EI " << io::fmt(w_ei) << (report["w_ei_dominates"].get<bool>() ? " >= " : " < ") << "mean optimum\n"
            << "policy <= oracle on every realization: " << (dominated ? "yes" : "NO") << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deadline-constrained packet scheduling experiments"};
  app.require_subcommand(1);
  Common o;
  std::string program = "fs";
  std::size_t period = 1;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seeds", o.seeds, "seed count N (0..N-1) or comma-separated list");
    sub->add_option("--eps", o.eps, "capacity slack eps");
    sub->add_option("--scheduler", o.scheduler, "FBPF, DLPF-EXP, DLPF-<len> or GLS-FP");
    sub->add_option("--jobs", o.jobs, "worker threads");
  };
  auto* solve = app.add_subcommand("solve", "solve the stationary or time-indexed flow program");
  common(solve);
  solve->add_option("--program", program, "fs, fns or fnsp");
  solve->add_option("--period", period, "period for fnsp");
  auto* simulate = app.add_subcommand("simulate", "simulate schedulers on seeded realizations");
  common(simulate);
  auto* sweep = app.add_subcommand("sweep", "sweep an axis and report approximation ratios");
  common(sweep);
  sweep->add_option("--axis", o.axis, "capacity, capacity+traffic or distribution");
  auto* trace = app.add_subcommand("trace", "turn a packet trace into types and an arrival matrix");
  common(trace);
  auto* oracle = app.add_subcommand("oracle", "brute-force optimum on a tiny instance");
  common(oracle);
  auto* compare = app.add_subcommand("compare", "compare schedulers at one point");
  common(compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*solve) return cmd_solve(o, program, period);
    if (*simulate) return cmd_simulate(o);
    if (*sweep) return cmd_sweep(o);
    if (*trace) return cmd_trace(o);
    if (*oracle) return cmd_oracle(o);
    if (*compare) return cmd_compare(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const SolverFailure& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  } catch (const OracleOverflow& e) {
    std::cerr << "oracle overflow: " << e.what() << "\n";
    return kOracle;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
