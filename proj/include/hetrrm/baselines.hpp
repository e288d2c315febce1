#pragma once

// Comparison schemes. Each is a transformation of the topology or the RRM
// configuration; the iterative pipeline itself is shared.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hetrrm/channel.hpp"
#include "hetrrm/rrm.hpp"
#include "hetrrm/topology.hpp"

namespace hetrrm {

enum class Mode { proposed, fbc, fddsa, ttrsc };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::proposed: return "proposed";
    case Mode::fbc: return "fbc";
    case Mode::fddsa: return "fddsa";
    case Mode::ttrsc: return "ttrsc";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(const std::string& s) {
  for (Mode m : {Mode::proposed, Mode::fbc, Mode::fddsa, Mode::ttrsc}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

// Capacity (nats per subframe) of the wired links added for full backhaul:
// ten times an upper bound on any radio link's conditional rate, M log(1 +
// mean SNR) by Jensen.
inline double default_fbc_capacity(const ChannelModel& ch) {
  double best = 0.0;
  for (std::size_t l = 0; l < ch.num_links(); ++l) {
    if (!ch.wired(l)) best = std::max(best, static_cast<double>(ch.subbands()) * snr_term(ch.mean_snr(l)));
  }
  return 10.0 * std::max(best, 1.0);
}

// Full backhaul connectivity: every pico BS without backhaul joins the
// backhaul set and gets a wired link from its nearest macro BS. New links are
// appended so existing link indices (and their channel draws) are unchanged.
inline TopologyGraph with_full_backhaul(const TopologyGraph& g, double wired_capacity) {
  if (!(wired_capacity > 0.0) || !std::isfinite(wired_capacity)) {
    throw DomainError("with_full_backhaul: wired capacity must be positive and finite");
  }
  std::vector<Link> links = g.links();
  std::vector<NodeId> backhaul;
  for (std::size_t n = 0; n < g.num_nodes(); ++n) {
    if (g.has_backhaul(NodeId{n})) backhaul.push_back(NodeId{n});
  }
  for (std::size_t n = 0; n < g.num_nodes(); ++n) {
    const NodeId id{n};
    if (g.node(id).kind != NodeKind::pico_bs || g.has_backhaul(id)) continue;
    std::optional<NodeId> nearest;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < g.num_nodes(); ++m) {
      if (g.nodes()[m].kind != NodeKind::macro_bs) continue;
      const double d = g.distance_m(NodeId{m}, id);
      if (d < best) {
        best = d;
        nearest = NodeId{m};
      }
    }
    if (!nearest) throw DomainError("with_full_backhaul: no macro BS to attach pico " + g.node(id).name);
    links.push_back({*nearest, id, true, wired_capacity});
    backhaul.push_back(id);
  }
  std::sort(backhaul.begin(), backhaul.end());
  return TopologyGraph(g.nodes(), std::move(links), std::move(backhaul), g.flows(), g.conflict_pairs());
}

// RRM configuration for a mode; topology changes for FBC are made by the
// caller with with_full_backhaul().
inline RrmConfig configure_mode(RrmConfig cfg, Mode m) {
  switch (m) {
    case Mode::proposed:
    case Mode::fbc:
      break;
    case Mode::fddsa:
      cfg.policy = PolicyKind::uniform;
      break;
    case Mode::ttrsc:
      cfg.rule = SchedulingRule::large_scale;
      break;
  }
  return cfg;
}

}  // namespace hetrrm
