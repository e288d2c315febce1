#pragma once

// End-to-end runs: scenario in, trace and summary out.

#include <chrono>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hetrrm/baselines.hpp"
#include "hetrrm/rrm.hpp"
#include "hetrrm/scenario.hpp"
#include "hetrrm/trace.hpp"

namespace hetrrm {

enum ExitCode : int { kExitConverged = 0, kExitMaxIterations = 2, kExitConfigError = 3, kExitOracleSize = 4 };

struct ExperimentOptions {
  bool record_timing = false;
  bool check_procedure_one = true;
};

struct ExperimentResult {
  Mode mode = Mode::proposed;
  RrmResult rrm;
  std::optional<CertificateCheck> check;
  std::string trace;
  std::size_t num_macros = 0;
  double omega_rbar = 0.0;  // omega^T rbar at the final state

  int exit_code() const { return rrm.converged ? kExitConverged : kExitMaxIterations; }
  double utility() const { return rrm.state.utility; }
  // Sum of flow rates per macro cell, bits per subframe.
  double per_cell_throughput_bits() const {
    double s = 0.0;
    for (double d : rrm.state.flow.d) s += d;
    return s / kNatsPerBit / static_cast<double>(num_macros ? num_macros : 1);
  }
};

inline ExperimentResult run_experiment(const ScenarioConfig& cfg, Mode mode, const ExperimentOptions& opt = {}) {
  const World w = build_world(cfg, mode);
  const RrmEngine engine(w.graph, w.channel, w.rrm);
  ExperimentResult out;
  out.mode = mode;
  for (const Node& n : w.graph.nodes()) out.num_macros += n.kind == NodeKind::macro_bs ? 1 : 0;

  std::ostringstream os;
  write_trace_header(os, mode, cfg);
  const std::size_t nb = w.graph.num_base_stations();
  auto last = std::chrono::steady_clock::now();
  out.rrm = engine.run_to_convergence([&](const IterationRecord& r) {
    std::optional<double> wall;
    if (opt.record_timing) {
      const auto now = std::chrono::steady_clock::now();
      wall = std::chrono::duration<double, std::milli>(now - last).count();
      last = now;
    }
    os << format_record(r, nb, wall) << '\n';
  });
  if (opt.check_procedure_one && w.rrm.policy == PolicyKind::adaptive) {
    out.check = engine.procedure_one_check(out.rrm.state.omega);
  }
  for (std::size_t l = 0; l < out.rrm.state.rbar.size(); ++l) {
    out.omega_rbar += out.rrm.state.omega[l] * out.rrm.state.rbar[l];
  }
  os << format_final(out.rrm, nb, out.check ? &*out.check : nullptr) << '\n';
  out.trace = os.str();
  return out;
}

// Sets one scenario parameter by name (used by sweeps).
inline void apply_parameter(ScenarioConfig& cfg, const std::string& name, double value) {
  if (name == "p_pico_dbm") cfg.radio.p_pico_dbm = value;
  else if (name == "p_macro_dbm") cfg.radio.p_macro_dbm = value;
  else if (name == "seed") cfg.seed = static_cast<std::uint64_t>(value);
  else if (name == "subbands") cfg.subbands = static_cast<std::size_t>(value);
  else if (name == "superframe_length") cfg.superframe_length = static_cast<std::size_t>(value);
  else if (name == "alpha") cfg.utility.alpha = value;
  else if (name == "shadowing_sigma_db") cfg.pathloss.shadowing_sigma_db = value;
  else throw ConfigError("unknown sweep parameter '" + name + "'");
}

struct SweepPoint {
  double value = 0.0;
  Mode mode = Mode::proposed;
  double utility = 0.0;
  double throughput_bits = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Runs every mode at every parameter value with the scenario's seed, so the
// modes at one value see the same channel.
inline std::vector<SweepPoint> sweep(const ScenarioConfig& base, const std::string& param,
                                     const std::vector<double>& values,
                                     const std::vector<Mode>& modes = {Mode::proposed, Mode::fbc, Mode::fddsa,
                                                                       Mode::ttrsc}) {
  std::vector<SweepPoint> out;
  for (double v : values) {
    ScenarioConfig cfg = base;
    apply_parameter(cfg, param, v);
    for (Mode m : modes) {
      ExperimentOptions opt;
      opt.check_procedure_one = false;
      const ExperimentResult r = run_experiment(cfg, m, opt);
      out.push_back({v, m, r.utility(), r.per_cell_throughput_bits(), r.rrm.converged, r.rrm.iterations});
    }
  }
  return out;
}

}  // namespace hetrrm
