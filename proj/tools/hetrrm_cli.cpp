// Command-line front end: run, oracle, validate, sweep.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hetrrm/hetrrm.hpp"

namespace {

using namespace hetrrm;

struct Loaded {
  ScenarioConfig config;
  std::optional<Mode> trace_mode;
};

// Accepts a scenario file or a trace (whose config echo is replayed).
Loaded load_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  Loaded out;
  try {
    if (looks_like_trace(text)) {
      const TraceFile t = parse_trace(text);
      out.config = parse_scenario(t.config_text);
      out.trace_mode = t.mode;
    } else {
      out.config = parse_scenario(text);
    }
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return out;
}

std::string bits(double nats) { return detail::format_double(nats / kNatsPerBit); }

int cmd_run(const std::string& scenario, const std::string& mode_name, std::optional<std::uint64_t> seed,
            const std::string& out_path, bool timing) {
  Loaded in = load_input(scenario);
  Mode mode = in.trace_mode.value_or(Mode::proposed);
  if (!mode_name.empty()) {
    const auto m = parse_mode(mode_name);
    if (!m) throw ConfigError("unknown mode '" + mode_name + "'");
    mode = *m;
  }
  if (seed) in.config.seed = *seed;
  ExperimentOptions opt;
  opt.record_timing = timing;
  const ExperimentResult r = run_experiment(in.config, mode, opt);
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + out_path + "'");
    out << r.trace;
  } else {
    std::cout << r.trace;
  }
  std::cerr << to_string(mode) << ": U=" << detail::format_double(r.utility())
            << " iterations=" << r.rrm.iterations << (r.rrm.converged ? " converged" : " max-iterations")
            << " gap=" << detail::format_double(r.rrm.gap) << " per-cell throughput=" << detail::format_double(r.per_cell_throughput_bits())
            << " bits/subframe\n";
  return r.exit_code();
}

int cmd_oracle(const std::string& scenario) {
  const Loaded in = load_input(scenario);
  const OracleResult o = oracle_solve(in.config);
  const World w = build_world(in.config);
  const std::size_t nb = w.graph.num_base_stations();
  std::cout << "U* = " << detail::format_double(o.utility) << "\ncolumns = " << o.columns.size() << '\n';
  if (o.grid_utility) std::cout << "grid U = " << detail::format_double(*o.grid_utility) << '\n';
  std::cout << "d (bits) =";
  for (double d : o.d) std::cout << ' ' << bits(d);
  std::cout << '\n';
  for (std::size_t j = 0; j < o.columns.size(); ++j) {
    if (o.q[j] < 1e-7) continue;
    std::cout << "q " << to_string(o.columns[j].pattern, nb) << " = " << detail::format_double(o.q[j]) << " rates =";
    for (double r : o.columns[j].rates) std::cout << ' ' << bits(r);
    std::cout << '\n';
  }
  return kExitConverged;
}

int cmd_validate(const std::string& scenario) {
  const Loaded in = load_input(scenario);
  const World w = build_world(in.config);
  const auto patterns = enumerate_feasible_patterns(w.graph, in.config.max_base_stations);
  std::cout << "ok: " << w.graph.num_nodes() << " nodes, " << w.graph.num_links() << " links, "
            << w.graph.num_flows() << " flows, " << w.graph.num_base_stations() << " base stations, "
            << patterns.size() << " feasible DTX patterns\n";
  return kExitConverged;
}

int cmd_sweep(const std::string& scenario, const std::string& param, const std::vector<double>& values,
              const std::vector<std::string>& mode_names) {
  const Loaded in = load_input(scenario);
  std::vector<Mode> modes;
  for (const auto& n : mode_names) {
    const auto m = parse_mode(n);
    if (!m) throw ConfigError("unknown mode '" + n + "'");
    modes.push_back(*m);
  }
  if (modes.empty()) modes = {Mode::proposed, Mode::fbc, Mode::fddsa, Mode::ttrsc};
  std::cout << param << ",mode,utility,per_cell_throughput_bits,converged,iterations\n";
  for (const SweepPoint& p : sweep(in.config, param, values, modes)) {
    std::cout << detail::format_double(p.value) << ',' << to_string(p.mode) << ','
              << detail::format_double(p.utility) << ',' << detail::format_double(p.throughput_bits) << ','
              << (p.converged ? 1 : 0) << ',' << p.iterations << '\n';
  }
  return kExitConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-timescale RRM simulator for HetNets with flexible backhaul"};
  app.require_subcommand(1);

  std::string scenario, mode, out, param;
  std::uint64_t seed = 0;
  bool timing = false;
  std::vector<double> values;
  std::vector<std::string> modes;

  auto* run = app.add_subcommand("run", "run one mode to convergence and write its trace");
  run->add_option("--scenario", scenario, "scenario or trace file")->required();
  run->add_option("--mode", mode, "proposed, fbc, fddsa or ttrsc (default: proposed, or the trace's mode)");
  auto* seed_opt = run->add_option("--seed", seed, "overrides the scenario seed");
  run->add_option("--out", out, "trace output path (stdout when omitted)");
  run->add_flag("--record-timing", timing, "add wall time per iteration to the trace");

  auto* oracle = app.add_subcommand("oracle", "brute-force optimum of a small deterministic scenario");
  oracle->add_option("--scenario", scenario, "scenario file")->required();

  auto* validate_cmd = app.add_subcommand("validate", "parse and check a scenario");
  validate_cmd->add_option("--scenario", scenario, "scenario file")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "run all modes over a parameter sweep");
  sweep_cmd->add_option("--scenario", scenario, "scenario file")->required();
  sweep_cmd->add_option("--param", param, "p_pico_dbm, p_macro_dbm, seed, subbands, ...")->required();
  sweep_cmd->add_option("--values", values, "values, comma or space separated")->required()->delimiter(',');
  sweep_cmd->add_option("--modes", modes, "subset of modes")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      return cmd_run(scenario, mode, *seed_opt ? std::optional<std::uint64_t>(seed) : std::nullopt, out, timing);
    }
    if (*oracle) return cmd_oracle(scenario);
    if (*validate_cmd) return cmd_validate(scenario);
    if (*sweep_cmd) return cmd_sweep(scenario, param, values, modes);
  } catch (const OracleSizeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOracleSize;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  return kExitConfigError;
}
