#pragma once

// Brute-force reference for small deterministic-channel scenarios. With
// |h_small| fixed to one every subband of a link has the same SNR, so each
// active BS's weighted max-rate schedule gives all subbands to one outgoing
// link. Enumerating every pattern and every such link choice gives the
// vertices of the rate region; the optimum of the time-sharing program over
// all of them is the global optimum.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetrrm/netopt.hpp"
#include "hetrrm/phy.hpp"
#include "hetrrm/scenario.hpp"

namespace hetrrm {

class OracleSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OracleLimits {
  std::size_t max_base_stations = 6;
  std::size_t max_links = 12;
  std::size_t max_patterns = 16;
};

struct OracleColumn {
  DtxPattern pattern;
  std::vector<double> rates;
};

struct OracleResult {
  double utility = 0.0;
  std::vector<OracleColumn> columns;
  std::vector<double> q;
  std::vector<double> d;
  std::optional<double> grid_utility;  // grid search over q when at most 3 columns
  double gap = 0.0;
};

// Every distinct vertex rate vector: pattern times one radio link per active BS.
inline std::vector<OracleColumn> vertex_columns(const TopologyGraph& g, const ChannelModel& ch,
                                                const std::vector<DtxPattern>& patterns) {
  const std::size_t M = ch.subbands();
  std::vector<OracleColumn> out;
  for (const DtxPattern& a : patterns) {
    std::vector<std::vector<std::size_t>> choices;
    for (std::size_t o = 0; o < g.num_base_stations(); ++o) {
      if (!a.active(o)) continue;
      std::vector<std::size_t> radio;
      for (LinkId l : g.outgoing_links(g.base_stations()[o])) {
        if (!g.links()[l.value].wired) radio.push_back(l.value);
      }
      if (!radio.empty()) choices.push_back(std::move(radio));
    }
    std::vector<std::size_t> pick(choices.size(), 0);
    while (true) {
      OracleColumn c{a, std::vector<double>(g.num_links(), 0.0)};
      for (std::size_t l = 0; l < g.num_links(); ++l) {
        if (g.links()[l].wired) c.rates[l] = g.links()[l].wired_capacity;
      }
      for (std::size_t b = 0; b < choices.size(); ++b) {
        const std::size_t l = choices[b][pick[b]];
        c.rates[l] = static_cast<double>(M) * snr_term(ch.mean_snr(l));
      }
      const bool dup = std::any_of(out.begin(), out.end(), [&](const OracleColumn& o) { return o.rates == c.rates; });
      if (!dup) out.push_back(std::move(c));
      std::size_t b = 0;
      while (b < choices.size() && ++pick[b] == choices[b].size()) pick[b++] = 0;
      if (b == choices.size()) break;
    }
  }
  return out;
}

namespace detail {

inline double utility_at(const TopologyGraph& g, const std::vector<OracleColumn>& cols, const std::vector<double>& q,
                         const UtilitySpec& u, const SolverOptions& opt) {
  std::vector<double> r(g.num_links(), 0.0);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t l = 0; l < r.size(); ++l) r[l] += q[j] * cols[j].rates[l];
  }
  return solve_p1(g, r, u, opt).utility;
}

inline double grid_search(const TopologyGraph& g, const std::vector<OracleColumn>& cols, const UtilitySpec& u,
                          const SolverOptions& opt) {
  double best = -std::numeric_limits<double>::infinity();
  if (cols.size() == 1) return utility_at(g, cols, {1.0}, u, opt);
  if (cols.size() == 2) {
    for (int i = 0; i <= 1000; ++i) {
      const double t = i / 1000.0;
      best = std::max(best, utility_at(g, cols, {t, 1.0 - t}, u, opt));
    }
    return best;
  }
  // Three columns: coarse 1e-2 grid, then 1e-3 around the best point.
  int bi = 0, bj = 0;
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; i + j <= 100; ++j) {
      const double v = utility_at(g, cols, {i / 100.0, j / 100.0, (100 - i - j) / 100.0}, u, opt);
      if (v > best) {
        best = v;
        bi = i;
        bj = j;
      }
    }
  }
  for (int i = bi * 10 - 10; i <= bi * 10 + 10; ++i) {
    for (int j = bj * 10 - 10; j <= bj * 10 + 10; ++j) {
      if (i < 0 || j < 0 || i + j > 1000) continue;
      best = std::max(best, utility_at(g, cols, {i / 1000.0, j / 1000.0, (1000 - i - j) / 1000.0}, u, opt));
    }
  }
  return best;
}

}  // namespace detail

inline OracleResult oracle_solve(const ScenarioConfig& cfg, const OracleLimits& lim = {}) {
  if (!cfg.deterministic) throw ConfigError("oracle needs a deterministic-channel scenario (deterministic = true)");
  const World w = build_world(cfg, Mode::proposed);
  const TopologyGraph& g = w.graph;
  if (g.num_base_stations() > lim.max_base_stations || g.num_links() > lim.max_links) {
    throw OracleSizeError("oracle limited to " + std::to_string(lim.max_base_stations) + " BSs and " +
                          std::to_string(lim.max_links) + " links; scenario has " +
                          std::to_string(g.num_base_stations()) + " and " + std::to_string(g.num_links()));
  }
  const auto patterns = enumerate_feasible_patterns(g, lim.max_base_stations);
  if (patterns.size() > lim.max_patterns) {
    throw OracleSizeError("oracle limited to " + std::to_string(lim.max_patterns) + " feasible patterns; scenario has " +
                          std::to_string(patterns.size()));
  }
  OracleResult res;
  res.columns = vertex_columns(g, w.channel, patterns);
  std::vector<std::vector<double>> rows;
  for (const auto& c : res.columns) rows.push_back(c.rates);
  const TimeSharingSolution ts = solve_flow_program(g, rows, cfg.utility, w.rrm.time_sharing.inner);
  res.utility = ts.flow.utility;
  res.q = ts.q;
  res.d = ts.flow.d;
  res.gap = ts.gap;
  if (res.columns.size() <= 3) {
    res.grid_utility = detail::grid_search(g, res.columns, cfg.utility, w.rrm.time_sharing.inner);
  }
  return res;
}

}  // namespace hetrrm
