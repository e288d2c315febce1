#pragma once

// Run traces. Layout:
//
//   hetrrm-trace 1
//   mode = <mode>
//   [config]
//   <canonical scenario text, seed included>
//   [end-config]
//   iter v=1 i=... U=... ...
//   final v=1 converged=... ...
//
// Rates are in bits per subframe. Every record carries its schema version.
// Output is a pure function of the inputs unless wall time is requested.

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hetrrm/baselines.hpp"
#include "hetrrm/phy.hpp"
#include "hetrrm/rrm.hpp"
#include "hetrrm/scenario.hpp"

namespace hetrrm {

inline constexpr const char* kTraceHeader = "hetrrm-trace 1";
inline constexpr int kTraceRecordVersion = 1;

namespace detail {

inline std::string join_bits(const std::vector<double>& nats) {
  std::string out;
  for (std::size_t i = 0; i < nats.size(); ++i) {
    if (i) out += ',';
    out += format_double(nats[i] / kNatsPerBit);
  }
  return out.empty() ? "-" : out;
}

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out.empty() ? "-" : out;
}

}  // namespace detail

inline void write_trace_header(std::ostream& os, Mode mode, const ScenarioConfig& cfg) {
  os << kTraceHeader << "\nmode = " << to_string(mode) << "\n[config]\n" << serialize_scenario(cfg)
     << "[end-config]\n";
}

inline std::string format_record(const IterationRecord& r, std::size_t num_bs, std::optional<double> wall_ms = {}) {
  std::ostringstream os;
  os << "iter v=" << kTraceRecordVersion << " i=" << r.i << " U=" << detail::format_double(r.utility)
     << " A=" << r.patterns.size() << " patterns=";
  for (std::size_t j = 0; j < r.patterns.size(); ++j) os << (j ? "," : "") << to_string(r.patterns[j], num_bs);
  os << " q=" << detail::join(r.q) << " d=" << detail::join_bits(r.d) << " rbar=" << detail::join_bits(r.rbar)
     << " emp=" << detail::join_bits(r.empirical) << " tol_mc=" << detail::format_double(r.tol_mc)
     << " decision_subframe=" << r.decision_subframe << " eq4_violations=" << r.schedule_violations
     << " flow_infeasibility=" << detail::format_double(r.flow_infeasibility)
     << " simplex_ok=" << (r.simplex_ok ? 1 : 0);
  if (wall_ms) os << " wall_ms=" << detail::format_double(*wall_ms);
  return os.str();
}

inline std::string format_final(const RrmResult& res, std::size_t num_bs, const CertificateCheck* check) {
  std::ostringstream os;
  os << "final v=" << kTraceRecordVersion << " converged=" << (res.converged ? 1 : 0)
     << " iterations=" << res.iterations << " U=" << detail::format_double(res.state.utility)
     << " gap=" << detail::format_double(res.gap);
  if (check) {
    os << " procedure_one_ok=" << (check->ok ? 1 : 0)
       << " procedure_one_margin=" << detail::format_double(check->worst_difference);
  }
  os << " d=" << detail::join_bits(res.state.flow.d) << " active=";
  bool first = true;
  for (std::size_t j = 0; j < res.state.columns.size(); ++j) {
    if (!(res.state.q[j] > 0.0)) continue;
    os << (first ? "" : ",") << to_string(res.state.columns[j].pattern, num_bs) << ':'
       << detail::format_double(res.state.q[j]);
    first = false;
  }
  if (first) os << '-';
  return os.str();
}

struct TraceFile {
  Mode mode = Mode::proposed;
  std::string config_text;
  std::vector<std::map<std::string, std::string>> iterations;
  std::map<std::string, std::string> final_record;
};

inline bool looks_like_trace(const std::string& text) { return text.rfind(kTraceHeader, 0) == 0; }

inline TraceFile parse_trace(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) throw ConfigError("not a trace file");
  TraceFile t;
  bool in_config = false;
  auto fields = [](const std::string& l) {
    std::map<std::string, std::string> out;
    std::istringstream is(l);
    std::string tok;
    is >> tok;
    while (is >> tok) {
      const auto eq = tok.find('=');
      if (eq != std::string::npos) out[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return out;
  };
  while (std::getline(in, line)) {
    if (in_config) {
      if (line == "[end-config]") in_config = false;
      else t.config_text += line + '\n';
      continue;
    }
    if (line == "[config]") {
      in_config = true;
    } else if (line.rfind("mode = ", 0) == 0) {
      const auto m = parse_mode(line.substr(7));
      if (!m) throw ConfigError("trace names unknown mode '" + line.substr(7) + "'");
      t.mode = *m;
    } else if (line.rfind("iter ", 0) == 0) {
      t.iterations.push_back(fields(line));
    } else if (line.rfind("final ", 0) == 0) {
      t.final_record = fields(line);
    }
  }
  if (t.config_text.empty()) throw ConfigError("trace has no config echo");
  return t;
}

}  // namespace hetrrm
