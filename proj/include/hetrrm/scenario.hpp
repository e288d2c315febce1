#pragma once

// Scenario files: a versioned, line-oriented text format.
//
//   hetrrm-scenario 1
//   [general]        key = value
//   [utility]        key = value
//   [radio]          key = value
//   [pathloss]       key = value (class keys take "exponent ref_gain_db")
//   [solver]         key = value
//   [nodes]          name kind x_m y_m
//   [links]          head tail [wired capacity_bits]
//   [backhaul]       name...
//   [flows]          name source destination
//   [conflicts]      bs_a bs_b   (optional; replaces the geometric rule)
//
// '#' starts a comment. Rates on the wire are in bits per subframe.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "hetrrm/baselines.hpp"
#include "hetrrm/channel.hpp"
#include "hetrrm/ids.hpp"
#include "hetrrm/rrm.hpp"
#include "hetrrm/topology.hpp"

namespace hetrrm {

inline constexpr const char* kScenarioHeader = "hetrrm-scenario 1";
inline constexpr double kNatsPerBit = 0.6931471805599453;

struct LinkSpec {
  std::string head;
  std::string tail;
  bool wired = false;
  double capacity_bits = 0.0;
};

struct FlowSpec {
  std::string name;
  std::string source;
  std::string destination;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  bool deterministic = false;
  std::size_t subbands = 10;
  std::size_t superframe_length = 200;
  std::size_t guard_subframes = 10;
  std::size_t estimation_samples = 0;
  EstimationWindow window = EstimationWindow::common;
  double epsilon = 1e-6;
  bool require_certificate = true;
  double certificate_tolerance = 1e-4;
  bool refresh_patterns = true;
  bool improving_patterns = true;
  bool average_weights = true;
  int max_iterations = 50;
  std::vector<std::string> initial_pattern;  // active BS names; empty means automatic
  std::size_t max_base_stations = 20;

  UtilitySpec utility;
  RadioParams radio;
  CoverageRadii radii;
  PathLossParams pathloss;

  double ipm_tolerance = 1e-9;
  int ipm_max_iterations = 200;
  TimeSharingMethod time_sharing = TimeSharingMethod::interior_point;
  double fw_gap = 1e-5;
  int fw_max_iterations = 500;
  double prune_threshold = 1e-9;
  std::optional<double> fbc_capacity_bits;

  std::vector<Node> nodes;
  std::vector<LinkSpec> links;
  std::vector<std::string> backhaul;
  std::vector<FlowSpec> flows;
  std::optional<std::vector<std::pair<std::string, std::string>>> conflicts;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string tok; is >> tok;) out.push_back(tok);
  return out;
}

[[noreturn]] inline void fail(std::size_t line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

inline double parse_double(const std::string& s, std::size_t line, const std::string& what) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
    fail(line, what + ": expected a number, got '" + s + "'");
  }
  return v;
}

inline std::uint64_t parse_uint(const std::string& s, std::size_t line, const std::string& what) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    fail(line, what + ": expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& s, std::size_t line, const std::string& what) {
  if (s == "true") return true;
  if (s == "false") return false;
  fail(line, what + ": expected true or false, got '" + s + "'");
}

// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace detail

inline ScenarioConfig parse_scenario(std::istream& in) {
  using detail::fail;
  ScenarioConfig cfg;
  std::string raw;
  std::size_t line_no = 0;
  bool header = false;
  std::string section;
  std::set<std::string> seen_sections;
  std::set<std::string> seen_keys;

  auto kv = [&](const std::string& text, std::string& key, std::string& value) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) fail(line_no, "expected 'key = value' in [" + section + "]");
    key = detail::trim(std::string_view(text).substr(0, eq));
    value = detail::trim(std::string_view(text).substr(eq + 1));
    if (key.empty() || value.empty()) fail(line_no, "empty key or value in [" + section + "]");
    if (!seen_keys.insert(section + "." + key).second) fail(line_no, "duplicate key '" + key + "'");
  };
  auto num = [&](const std::string& v, const std::string& k) { return detail::parse_double(v, line_no, k); };
  auto uint = [&](const std::string& v, const std::string& k) { return detail::parse_uint(v, line_no, k); };
  auto positive = [&](double v, const std::string& k) {
    if (!(v > 0.0)) fail(line_no, k + " must be positive");
    return v;
  };
  auto unknown = [&](const std::string& k) { fail(line_no, "unknown key '" + k + "' in [" + section + "]"); };

  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string text = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    if (!header) {
      if (text != kScenarioHeader) fail(line_no, std::string("expected header '") + kScenarioHeader + "'");
      header = true;
      continue;
    }
    if (text.front() == '[') {
      if (text.back() != ']') fail(line_no, "malformed section header");
      section = text.substr(1, text.size() - 2);
      static const std::set<std::string> known{"general", "utility", "radio",  "pathloss", "solver",
                                               "nodes",   "links",   "backhaul", "flows",  "conflicts"};
      if (!known.count(section)) fail(line_no, "unknown section [" + section + "]");
      if (!seen_sections.insert(section).second) fail(line_no, "duplicate section [" + section + "]");
      if (section == "conflicts") cfg.conflicts.emplace();
      continue;
    }
    if (section.empty()) fail(line_no, "content before the first section");
    std::string key, value;
    if (section == "general") {
      kv(text, key, value);
      if (key == "name") cfg.name = value;
      else if (key == "seed") cfg.seed = uint(value, key);
      else if (key == "deterministic") cfg.deterministic = detail::parse_bool(value, line_no, key);
      else if (key == "subbands") cfg.subbands = uint(value, key);
      else if (key == "superframe_length") cfg.superframe_length = uint(value, key);
      else if (key == "guard_subframes") cfg.guard_subframes = uint(value, key);
      else if (key == "estimation_samples") cfg.estimation_samples = uint(value, key);
      else if (key == "estimation_window") {
        if (value == "common") cfg.window = EstimationWindow::common;
        else if (value == "superframe") cfg.window = EstimationWindow::superframe;
        else fail(line_no, "estimation_window must be common or superframe");
      } else if (key == "epsilon") cfg.epsilon = positive(num(value, key), key);
      else if (key == "require_certificate") cfg.require_certificate = detail::parse_bool(value, line_no, key);
      else if (key == "certificate_tolerance") cfg.certificate_tolerance = positive(num(value, key), key);
      else if (key == "refresh_patterns") cfg.refresh_patterns = detail::parse_bool(value, line_no, key);
      else if (key == "improving_patterns") cfg.improving_patterns = detail::parse_bool(value, line_no, key);
      else if (key == "average_weights") cfg.average_weights = detail::parse_bool(value, line_no, key);
      else if (key == "max_iterations") cfg.max_iterations = static_cast<int>(uint(value, key));
      else if (key == "initial_pattern") {
        cfg.initial_pattern = value == "auto" ? std::vector<std::string>{} : detail::split_ws(value);
      } else if (key == "max_base_stations") cfg.max_base_stations = uint(value, key);
      else unknown(key);
    } else if (section == "utility") {
      kv(text, key, value);
      if (key == "alpha") cfg.utility.alpha = num(value, key);
      else if (key == "epsilon") cfg.utility.epsilon = positive(num(value, key), key);
      else unknown(key);
    } else if (section == "radio") {
      kv(text, key, value);
      if (key == "p_macro_dbm") cfg.radio.p_macro_dbm = num(value, key);
      else if (key == "p_pico_dbm") cfg.radio.p_pico_dbm = num(value, key);
      else if (key == "macro_radius_m") cfg.radii.macro_m = positive(num(value, key), key);
      else if (key == "pico_radius_m") cfg.radii.pico_m = positive(num(value, key), key);
      else unknown(key);
    } else if (section == "pathloss") {
      kv(text, key, value);
      auto cls = [&](PathLossClass& c) {
        const auto toks = detail::split_ws(value);
        if (toks.size() != 2) fail(line_no, key + " takes 'exponent ref_gain_db'");
        c.exponent = num(toks[0], key);
        c.reference_gain_db = num(toks[1], key);
      };
      if (key == "macro_macro") cls(cfg.pathloss.macro_macro);
      else if (key == "bs_bs") cls(cfg.pathloss.bs_bs);
      else if (key == "bs_mu") cls(cfg.pathloss.bs_mu);
      else if (key == "shadowing_sigma_db") cfg.pathloss.shadowing_sigma_db = num(value, key);
      else if (key == "reference_distance_m") cfg.pathloss.reference_distance_m = positive(num(value, key), key);
      else unknown(key);
    } else if (section == "solver") {
      kv(text, key, value);
      if (key == "ipm_tolerance") cfg.ipm_tolerance = positive(num(value, key), key);
      else if (key == "ipm_max_iterations") cfg.ipm_max_iterations = static_cast<int>(uint(value, key));
      else if (key == "time_sharing") {
        if (value == "interior_point") cfg.time_sharing = TimeSharingMethod::interior_point;
        else if (value == "frank_wolfe") cfg.time_sharing = TimeSharingMethod::frank_wolfe;
        else fail(line_no, "time_sharing must be interior_point or frank_wolfe");
      } else if (key == "fw_gap") cfg.fw_gap = positive(num(value, key), key);
      else if (key == "fw_max_iterations") cfg.fw_max_iterations = static_cast<int>(uint(value, key));
      else if (key == "prune_threshold") cfg.prune_threshold = num(value, key);
      else if (key == "fbc_capacity_bits") {
        if (value == "auto") cfg.fbc_capacity_bits.reset();
        else cfg.fbc_capacity_bits = positive(num(value, key), key);
      } else unknown(key);
    } else {
      const auto toks = detail::split_ws(text);
      if (section == "nodes") {
        if (toks.size() != 4) fail(line_no, "node lines are 'name kind x_m y_m'");
        Node n;
        n.name = toks[0];
        if (toks[1] == "macro") n.kind = NodeKind::macro_bs;
        else if (toks[1] == "pico") n.kind = NodeKind::pico_bs;
        else if (toks[1] == "mu") n.kind = NodeKind::mobile_user;
        else fail(line_no, "node kind must be macro, pico or mu, got '" + toks[1] + "'");
        n.x_m = num(toks[2], "x");
        n.y_m = num(toks[3], "y");
        for (const Node& other : cfg.nodes) {
          if (other.name == n.name) fail(line_no, "duplicate node '" + n.name + "'");
        }
        cfg.nodes.push_back(std::move(n));
      } else if (section == "links") {
        LinkSpec l;
        if (toks.size() == 2) {
          l = {toks[0], toks[1]};
        } else if (toks.size() == 4 && toks[2] == "wired") {
          l = {toks[0], toks[1], true, positive(num(toks[3], "wired capacity"), "wired capacity")};
        } else {
          fail(line_no, "link lines are 'head tail' or 'head tail wired capacity_bits'");
        }
        cfg.links.push_back(std::move(l));
      } else if (section == "backhaul") {
        for (const auto& t : toks) cfg.backhaul.push_back(t);
      } else if (section == "flows") {
        if (toks.size() != 3) fail(line_no, "flow lines are 'name source destination'");
        for (const FlowSpec& f : cfg.flows) {
          if (f.name == toks[0]) fail(line_no, "duplicate flow '" + toks[0] + "'");
        }
        cfg.flows.push_back({toks[0], toks[1], toks[2]});
      } else if (section == "conflicts") {
        if (toks.size() != 2) fail(line_no, "conflict lines are 'bs_a bs_b'");
        cfg.conflicts->emplace_back(toks[0], toks[1]);
      }
    }
  }
  if (!header) throw ConfigError(std::string("empty scenario: missing header '") + kScenarioHeader + "'");
  for (const char* required : {"general", "nodes", "links", "flows"}) {
    if (!seen_sections.count(required)) {
      throw ConfigError(std::string("missing required section [") + required + "]");
    }
  }
  return cfg;
}

inline ScenarioConfig parse_scenario(const std::string& text) {
  std::istringstream is(text);
  return parse_scenario(is);
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  try {
    return parse_scenario(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Canonical text form; parse_scenario(serialize_scenario(c)) reproduces c.
inline std::string serialize_scenario(const ScenarioConfig& c) {
  using detail::format_double;
  std::ostringstream os;
  os << kScenarioHeader << "\n\n[general]\n";
  os << "name = " << c.name << '\n';
  os << "seed = " << c.seed << '\n';
  os << "deterministic = " << (c.deterministic ? "true" : "false") << '\n';
  os << "subbands = " << c.subbands << '\n';
  os << "superframe_length = " << c.superframe_length << '\n';
  os << "guard_subframes = " << c.guard_subframes << '\n';
  os << "estimation_samples = " << c.estimation_samples << '\n';
  os << "estimation_window = " << (c.window == EstimationWindow::common ? "common" : "superframe") << '\n';
  os << "epsilon = " << format_double(c.epsilon) << '\n';
  os << "require_certificate = " << (c.require_certificate ? "true" : "false") << '\n';
  os << "certificate_tolerance = " << format_double(c.certificate_tolerance) << '\n';
  os << "refresh_patterns = " << (c.refresh_patterns ? "true" : "false") << '\n';
  os << "improving_patterns = " << (c.improving_patterns ? "true" : "false") << '\n';
  os << "average_weights = " << (c.average_weights ? "true" : "false") << '\n';
  os << "max_iterations = " << c.max_iterations << '\n';
  os << "initial_pattern =";
  if (c.initial_pattern.empty()) os << " auto";
  for (const auto& n : c.initial_pattern) os << ' ' << n;
  os << '\n';
  os << "max_base_stations = " << c.max_base_stations << '\n';
  os << "\n[utility]\nalpha = " << format_double(c.utility.alpha) << "\nepsilon = "
     << format_double(c.utility.epsilon) << '\n';
  os << "\n[radio]\np_macro_dbm = " << format_double(c.radio.p_macro_dbm)
     << "\np_pico_dbm = " << format_double(c.radio.p_pico_dbm)
     << "\nmacro_radius_m = " << format_double(c.radii.macro_m)
     << "\npico_radius_m = " << format_double(c.radii.pico_m) << '\n';
  auto cls = [&](const char* k, const PathLossClass& p) {
    os << k << " = " << format_double(p.exponent) << ' ' << format_double(p.reference_gain_db) << '\n';
  };
  os << "\n[pathloss]\n";
  cls("macro_macro", c.pathloss.macro_macro);
  cls("bs_bs", c.pathloss.bs_bs);
  cls("bs_mu", c.pathloss.bs_mu);
  os << "shadowing_sigma_db = " << format_double(c.pathloss.shadowing_sigma_db) << '\n';
  os << "reference_distance_m = " << format_double(c.pathloss.reference_distance_m) << '\n';
  os << "\n[solver]\nipm_tolerance = " << format_double(c.ipm_tolerance)
     << "\nipm_max_iterations = " << c.ipm_max_iterations << "\ntime_sharing = "
     << (c.time_sharing == TimeSharingMethod::interior_point ? "interior_point" : "frank_wolfe")
     << "\nfw_gap = " << format_double(c.fw_gap) << "\nfw_max_iterations = " << c.fw_max_iterations
     << "\nprune_threshold = " << format_double(c.prune_threshold) << "\nfbc_capacity_bits = "
     << (c.fbc_capacity_bits ? format_double(*c.fbc_capacity_bits) : std::string("auto")) << '\n';
  os << "\n[nodes]\n";
  for (const Node& n : c.nodes) {
    os << n.name << ' ' << to_string(n.kind) << ' ' << format_double(n.x_m) << ' ' << format_double(n.y_m) << '\n';
  }
  os << "\n[links]\n";
  for (const LinkSpec& l : c.links) {
    os << l.head << ' ' << l.tail;
    if (l.wired) os << " wired " << format_double(l.capacity_bits);
    os << '\n';
  }
  os << "\n[backhaul]\n";
  for (const auto& b : c.backhaul) os << b << '\n';
  os << "\n[flows]\n";
  for (const FlowSpec& f : c.flows) os << f.name << ' ' << f.source << ' ' << f.destination << '\n';
  if (c.conflicts) {
    os << "\n[conflicts]\n";
    for (const auto& [a, b] : *c.conflicts) os << a << ' ' << b << '\n';
  }
  return os.str();
}

// Topology, channel and RRM settings derived from a scenario.
struct World {
  TopologyGraph graph;
  ChannelModel channel;
  RrmConfig rrm;
};

inline TopologyGraph build_topology(const ScenarioConfig& c) {
  std::map<std::string, NodeId> ids;
  for (std::size_t i = 0; i < c.nodes.size(); ++i) ids.emplace(c.nodes[i].name, NodeId{i});
  auto lookup = [&](const std::string& name, const std::string& where) {
    const auto it = ids.find(name);
    if (it == ids.end()) throw ConfigError(where + " refers to unknown node '" + name + "'");
    return it->second;
  };
  std::vector<Link> links;
  for (std::size_t l = 0; l < c.links.size(); ++l) {
    const LinkSpec& s = c.links[l];
    const std::string where = "link " + std::to_string(l) + " (" + s.head + "->" + s.tail + ")";
    links.push_back({lookup(s.head, where), lookup(s.tail, where), s.wired, s.capacity_bits * kNatsPerBit});
  }
  std::vector<NodeId> backhaul;
  for (const auto& b : c.backhaul) backhaul.push_back(lookup(b, "backhaul entry"));
  std::vector<Flow> flows;
  for (const FlowSpec& f : c.flows) {
    const std::string where = "flow '" + f.name + "'";
    flows.push_back({f.name, lookup(f.source, where + " source"), lookup(f.destination, where + " destination")});
  }
  std::vector<std::pair<NodeId, NodeId>> conflicts;
  if (c.conflicts) {
    for (const auto& [a, b] : *c.conflicts) conflicts.emplace_back(lookup(a, "conflict"), lookup(b, "conflict"));
  } else {
    conflicts = geometric_conflicts(c.nodes, c.radii);
  }
  TopologyGraph g(c.nodes, std::move(links), std::move(backhaul), std::move(flows), conflicts);
  const auto violations = validate(g);
  if (!violations.empty()) throw ConfigError("invalid topology:\n" + describe(violations));
  if (g.num_flows() == 0) throw ConfigError("scenario defines no flows");
  return g;
}

inline RrmConfig rrm_config(const ScenarioConfig& c, const TopologyGraph& g) {
  RrmConfig r;
  r.superframe_length = c.superframe_length;
  r.guard_subframes = c.guard_subframes;
  r.estimation_samples = c.estimation_samples;
  r.window = c.window;
  r.epsilon = c.epsilon;
  r.require_certificate = c.require_certificate;
  r.certificate_tolerance = c.certificate_tolerance;
  r.refresh_patterns = c.refresh_patterns;
  r.improving_patterns = c.improving_patterns;
  r.average_weights = c.average_weights;
  r.max_iterations = c.max_iterations;
  r.prune_threshold = c.prune_threshold;
  r.max_base_stations = c.max_base_stations;
  r.utility = c.utility;
  r.time_sharing.method = c.time_sharing;
  r.time_sharing.gap_tolerance = c.fw_gap;
  r.time_sharing.max_iterations = c.fw_max_iterations;
  r.time_sharing.inner.tolerance = c.ipm_tolerance;
  r.time_sharing.inner.max_iterations = c.ipm_max_iterations;
  if (!c.initial_pattern.empty()) {
    DtxPattern a;
    for (const auto& name : c.initial_pattern) {
      bool found = false;
      for (std::size_t o = 0; o < g.num_base_stations(); ++o) {
        if (g.node(g.base_stations()[o]).name == name) {
          a.mask |= std::uint64_t{1} << o;
          found = true;
        }
      }
      if (!found) throw ConfigError("initial_pattern names '" + name + "', which is not a base station");
    }
    r.initial_pattern = a;
  }
  return r;
}

// Builds everything a run needs; FBC gets its augmented topology here.
inline World build_world(const ScenarioConfig& c, Mode mode = Mode::proposed) {
  if (c.subbands == 0) throw ConfigError("subbands must be at least 1");
  if (c.superframe_length == 0) throw ConfigError("superframe_length must be at least 1");
  if (c.guard_subframes >= c.superframe_length) throw ConfigError("guard_subframes must be below superframe_length");
  if (c.max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  try {
    c.utility.check();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  World w;
  try {
    w.graph = build_topology(c);
    w.channel = ChannelModel(w.graph, c.pathloss, c.radio, c.subbands, c.seed, c.deterministic);
    if (mode == Mode::fbc) {
      const double cap =
          c.fbc_capacity_bits ? *c.fbc_capacity_bits * kNatsPerBit : default_fbc_capacity(w.channel);
      w.graph = with_full_backhaul(w.graph, cap);
      w.channel = ChannelModel(w.graph, c.pathloss, c.radio, c.subbands, c.seed, c.deterministic);
    }
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  w.rrm = configure_mode(rrm_config(c, w.graph), mode);
  return w;
}

}  // namespace hetrrm
