#pragma once

// HetNet topology graph: base stations, mobile users, directed radio (or
// wired) links, backhaul attachment, flows and the BS interference relation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hetrrm/ids.hpp"

namespace hetrrm {

enum class NodeKind { macro_bs, pico_bs, mobile_user };

inline bool is_base_station(NodeKind k) { return k != NodeKind::mobile_user; }

inline const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::macro_bs: return "macro";
    case NodeKind::pico_bs: return "pico";
    case NodeKind::mobile_user: return "mu";
  }
  return "?";
}

struct Node {
  std::string name;
  NodeKind kind = NodeKind::mobile_user;
  double x_m = 0.0;
  double y_m = 0.0;
};

// A wired link carries a fixed capacity (nats per subframe) and never takes
// part in DTX or subband scheduling.
struct Link {
  NodeId head;
  NodeId tail;
  bool wired = false;
  double wired_capacity = 0.0;
};

struct Flow {
  std::string name;
  NodeId source;
  NodeId destination;
};

struct Violation {
  std::string rule;
  std::string detail;
};

// Coverage radii used to derive the interference relation geometrically.
struct CoverageRadii {
  double macro_m = 500.0;
  double pico_m = 100.0;

  double of(NodeKind k) const { return k == NodeKind::macro_bs ? macro_m : pico_m; }
};

class TopologyGraph {
 public:
  TopologyGraph() = default;

  // `conflicts` lists unordered BS pairs that interfere. Indices are checked
  // for range; the modelling invariants are checked by validate().
  TopologyGraph(std::vector<Node> nodes, std::vector<Link> links, std::vector<NodeId> backhaul,
                std::vector<Flow> flows, const std::vector<std::pair<NodeId, NodeId>>& conflicts)
      : nodes_(std::move(nodes)), links_(std::move(links)), flows_(std::move(flows)) {
    const std::size_t n = nodes_.size();
    auto check_node = [n](NodeId id, const char* what) {
      if (id.value >= n) {
        throw DomainError(std::string(what) + " refers to node " + std::to_string(id.value) +
                          " but only " + std::to_string(n) + " nodes exist");
      }
    };
    bs_ordinal_.assign(n, kNotBs);
    for (std::size_t i = 0; i < n; ++i) {
      if (is_base_station(nodes_[i].kind)) {
        bs_ordinal_[i] = base_stations_.size();
        base_stations_.push_back(NodeId{i});
      }
    }
    outgoing_.assign(n, {});
    incoming_.assign(n, {});
    for (std::size_t l = 0; l < links_.size(); ++l) {
      check_node(links_[l].head, "link head");
      check_node(links_[l].tail, "link tail");
      outgoing_[links_[l].head.value].push_back(LinkId{l});
      incoming_[links_[l].tail.value].push_back(LinkId{l});
    }
    backhaul_.assign(n, false);
    for (NodeId b : backhaul) {
      check_node(b, "backhaul entry");
      backhaul_[b.value] = true;
    }
    for (const Flow& f : flows_) {
      check_node(f.source, "flow source");
      check_node(f.destination, "flow destination");
    }
    const std::size_t nb = base_stations_.size();
    conflict_.assign(nb * nb, 0);
    for (auto [a, b] : conflicts) {
      check_node(a, "conflict");
      check_node(b, "conflict");
      if (bs_ordinal_[a.value] == kNotBs || bs_ordinal_[b.value] == kNotBs) {
        bad_conflicts_.emplace_back(a, b);
        continue;
      }
      if (a == b) {
        bad_conflicts_.emplace_back(a, b);
        continue;
      }
      const std::size_t ia = bs_ordinal_[a.value];
      const std::size_t ib = bs_ordinal_[b.value];
      conflict_[ia * nb + ib] = 1;
      conflict_[ib * nb + ia] = 1;
    }
  }

  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_links() const { return links_.size(); }
  std::size_t num_flows() const { return flows_.size(); }
  std::size_t num_base_stations() const { return base_stations_.size(); }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<Flow>& flows() const { return flows_; }
  const Node& node(NodeId id) const { return nodes_.at(id.value); }
  const Link& link(LinkId id) const { return links_.at(id.value); }
  const Flow& flow(FlowId id) const { return flows_.at(id.value); }

  // BSs in node order; a BS's position here is its "ordinal", the bit index
  // used by DTX patterns.
  const std::vector<NodeId>& base_stations() const { return base_stations_; }
  std::size_t bs_ordinal(NodeId n) const {
    const std::size_t o = bs_ordinal_.at(n.value);
    if (o == kNotBs) throw DomainError("node " + nodes_[n.value].name + " is not a base station");
    return o;
  }

  bool has_backhaul(NodeId n) const { return backhaul_.at(n.value); }

  // Outgoing link set of a BS, in link-index order.
  std::span<const LinkId> outgoing_links(NodeId n) const {
    if (!is_base_station(node(n).kind)) {
      throw DomainError("outgoing_links: node " + nodes_[n.value].name + " is a mobile user");
    }
    return outgoing_[n.value];
  }
  std::span<const LinkId> incoming_links(NodeId n) const { return incoming_.at(n.value); }

  bool conflicting(std::size_t bs_a, std::size_t bs_b) const {
    return conflict_[bs_a * base_stations_.size() + bs_b] != 0;
  }

  double distance_m(NodeId a, NodeId b) const {
    const Node& p = node(a);
    const Node& q = node(b);
    return std::hypot(p.x_m - q.x_m, p.y_m - q.y_m);
  }

  // Links lying on at least one directed path source -> destination, using
  // only links for which `usable` is true (all links when empty).
  std::vector<LinkId> links_on_paths(NodeId source, NodeId destination,
                                     std::span<const bool> usable = {}) const {
    auto ok = [&](std::size_t l) { return usable.empty() || usable[l]; };
    const std::vector<bool> fwd = reach(source, ok, /*forward=*/true);
    const std::vector<bool> bwd = reach(destination, ok, /*forward=*/false);
    std::vector<LinkId> out;
    for (std::size_t l = 0; l < links_.size(); ++l) {
      if (ok(l) && fwd[links_[l].head.value] && bwd[links_[l].tail.value]) out.push_back(LinkId{l});
    }
    return out;
  }

  bool reachable(NodeId source, NodeId destination) const {
    return reach(source, [](std::size_t) { return true; }, true)[destination.value];
  }

  const std::vector<std::pair<NodeId, NodeId>>& malformed_conflicts() const { return bad_conflicts_; }

  // Interfering BS pairs (a < b) as node ids.
  std::vector<std::pair<NodeId, NodeId>> conflict_pairs() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    const std::size_t nb = base_stations_.size();
    for (std::size_t a = 0; a < nb; ++a) {
      for (std::size_t b = a + 1; b < nb; ++b) {
        if (conflict_[a * nb + b]) out.emplace_back(base_stations_[a], base_stations_[b]);
      }
    }
    return out;
  }

 private:
  static constexpr std::size_t kNotBs = static_cast<std::size_t>(-1);

  template <typename Usable>
  std::vector<bool> reach(NodeId start, Usable ok, bool forward) const {
    std::vector<bool> seen(nodes_.size(), false);
    std::deque<std::size_t> queue{start.value};
    seen[start.value] = true;
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (LinkId l : forward ? outgoing_[u] : incoming_[u]) {
        if (!ok(l.value)) continue;
        const std::size_t v = forward ? links_[l.value].tail.value : links_[l.value].head.value;
        if (!seen[v]) {
          seen[v] = true;
          queue.push_back(v);
        }
      }
    }
    return seen;
  }

  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::vector<Flow> flows_;
  std::vector<NodeId> base_stations_;
  std::vector<std::size_t> bs_ordinal_;
  std::vector<std::vector<LinkId>> outgoing_;
  std::vector<std::vector<LinkId>> incoming_;
  std::vector<bool> backhaul_;
  std::vector<std::uint8_t> conflict_;
  std::vector<std::pair<NodeId, NodeId>> bad_conflicts_;
};

// Two BSs interfere iff they are closer than the larger coverage radius.
inline std::vector<std::pair<NodeId, NodeId>> geometric_conflicts(const std::vector<Node>& nodes,
                                                                  const CoverageRadii& radii) {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    if (!is_base_station(nodes[a].kind)) continue;
    for (std::size_t b = a + 1; b < nodes.size(); ++b) {
      if (!is_base_station(nodes[b].kind)) continue;
      const double d = std::hypot(nodes[a].x_m - nodes[b].x_m, nodes[a].y_m - nodes[b].y_m);
      if (d < std::max(radii.of(nodes[a].kind), radii.of(nodes[b].kind))) {
        out.emplace_back(NodeId{a}, NodeId{b});
      }
    }
  }
  return out;
}

// Node-link incidence matrix: +1 at the head row, -1 at the tail row.
inline Eigen::MatrixXi build_incidence(const TopologyGraph& g) {
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(g.num_nodes()),
                                            static_cast<Eigen::Index>(g.num_links()));
  for (std::size_t l = 0; l < g.num_links(); ++l) {
    const Link& link = g.links()[l];
    m(static_cast<Eigen::Index>(link.head.value), static_cast<Eigen::Index>(l)) = 1;
    m(static_cast<Eigen::Index>(link.tail.value), static_cast<Eigen::Index>(l)) = -1;
  }
  return m;
}

// Net outgoing rate of flow k at every node: +d at the source, -d at the
// destination.
inline Eigen::VectorXd flow_divergence(const TopologyGraph& g, FlowId k, double rate) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.num_nodes()));
  v(static_cast<Eigen::Index>(g.flow(k).source.value)) += rate;
  v(static_cast<Eigen::Index>(g.flow(k).destination.value)) -= rate;
  return v;
}

inline std::vector<Violation> validate(const TopologyGraph& g) {
  std::vector<Violation> out;
  auto add = [&out](std::string rule, std::string detail) {
    out.push_back({std::move(rule), std::move(detail)});
  };
  const auto& nodes = g.nodes();
  for (std::size_t l = 0; l < g.num_links(); ++l) {
    const Link& link = g.links()[l];
    const Node& head = nodes[link.head.value];
    const Node& tail = nodes[link.tail.value];
    const std::string tag = "link " + std::to_string(l) + " (" + head.name + "->" + tail.name + ")";
    if (head.kind == NodeKind::mobile_user) add("MU has outgoing link", tag);
    if (link.head == link.tail) add("self loop", tag);
    if (link.wired) {
      if (!(link.wired_capacity > 0.0) || !std::isfinite(link.wired_capacity)) {
        add("wired link needs positive finite capacity", tag);
      }
      if (tail.kind == NodeKind::mobile_user) add("wired link must end at a BS", tag);
    }
  }
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    const Node& node = nodes[n];
    if (node.kind == NodeKind::mobile_user && g.incoming_links(NodeId{n}).empty()) {
      add("MU has no incoming link", node.name);
    }
    if (node.kind == NodeKind::macro_bs && !g.has_backhaul(NodeId{n})) {
      add("macro BS without backhaul", node.name);
    }
    if (node.kind == NodeKind::mobile_user && g.has_backhaul(NodeId{n})) {
      add("backhaul entry is not a BS", node.name);
    }
  }
  for (auto [a, b] : g.malformed_conflicts()) {
    add("conflict must join two distinct BSs", nodes[a.value].name + "," + nodes[b.value].name);
  }
  for (std::size_t k = 0; k < g.num_flows(); ++k) {
    const Flow& f = g.flows()[k];
    const std::string tag = "flow " + std::to_string(k) + " (" + f.name + ")";
    const Node& src = nodes[f.source.value];
    const Node& dst = nodes[f.destination.value];
    if (!is_base_station(src.kind)) add("flow source is not a BS", tag);
    else if (!g.has_backhaul(f.source)) add("flow source has no backhaul", tag);
    if (dst.kind != NodeKind::mobile_user) add("flow destination is not an MU", tag);
    if (f.source != f.destination && !g.reachable(f.source, f.destination)) {
      add("flow " + std::to_string(k) + " unreachable", tag);
    }
  }
  return out;
}

inline std::string describe(const std::vector<Violation>& v) {
  std::ostringstream os;
  for (const auto& x : v) os << x.rule << ": " << x.detail << '\n';
  return os.str();
}

}  // namespace hetrrm
