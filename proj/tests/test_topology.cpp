#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "hetrrm/rng.hpp"
#include "hetrrm/topology.hpp"
#include "test_support.hpp"

using namespace hetrrm;
using hetrrm::testing::Builder;

namespace {

// Two-cell example: nodes 1..10 (macros 1 and 2, picos 3..5, users 6..10)
// with outgoing sets T(1)={1,2,4,5,7}, T(2)={12,13,14,16}, T(3)={3,8,18},
// T(4)={6,9,10,11}, T(5)={15,17}. Link 5 runs from node 1 to node 4; the
// other tails are chosen so every user is reached. Indices below are 1-based.
TopologyGraph two_cell_example() {
  Builder b;
  const NodeId m1 = b.macro("1"), m2 = b.macro("2");
  const NodeId p3 = b.pico("3"), p4 = b.pico("4"), p5 = b.pico("5");
  std::vector<NodeId> u;
  for (int i = 6; i <= 10; ++i) u.push_back(b.mu(std::to_string(i)));
  const std::vector<std::pair<NodeId, NodeId>> by_index{
      {m1, u[0]},  // 1
      {m1, u[1]},  // 2
      {p3, u[0]},  // 3
      {m1, p3},    // 4
      {m1, p4},    // 5
      {p4, u[1]},  // 6
      {m1, u[2]},  // 7
      {p3, u[2]},  // 8
      {p4, u[0]},  // 9
      {p4, u[2]},  // 10
      {p4, p5},    // 11
      {m2, u[3]},  // 12
      {m2, u[4]},  // 13
      {m2, p5},    // 14
      {p5, u[3]},  // 15
      {m2, p4},    // 16
      {p5, u[4]},  // 17
      {p3, p4},    // 18
  };
  for (auto [h, t] : by_index) b.link(h, t);
  b.flow(m1, u[0]);
  b.flow(m2, u[4]);
  return b.build();
}

std::set<std::size_t> one_based(std::span<const LinkId> ls) {
  std::set<std::size_t> out;
  for (LinkId l : ls) out.insert(l.value + 1);
  return out;
}

}  // namespace

TEST(Topology, SmallestIncidence) {
  Builder b;
  auto m = b.macro("m");
  auto u = b.mu("u");
  b.link(m, u);
  b.flow(m, u);
  const Eigen::MatrixXi G = build_incidence(b.build());
  ASSERT_EQ(G.rows(), 2);
  ASSERT_EQ(G.cols(), 1);
  EXPECT_EQ(G(0, 0), 1);
  EXPECT_EQ(G(1, 0), -1);
}

TEST(Topology, TwoCellExampleIncidenceAndOutgoingSets) {
  const TopologyGraph g = two_cell_example();
  EXPECT_TRUE(validate(g).empty()) << describe(validate(g));
  const Eigen::MatrixXi G = build_incidence(g);
  EXPECT_EQ(G(0, 4), 1);
  EXPECT_EQ(G(3, 4), -1);
  EXPECT_EQ(G.col(4).cwiseAbs().sum(), 2);
  EXPECT_EQ(one_based(g.outgoing_links(NodeId{0})), (std::set<std::size_t>{1, 2, 4, 5, 7}));
  EXPECT_EQ(one_based(g.outgoing_links(NodeId{1})), (std::set<std::size_t>{12, 13, 14, 16}));
  EXPECT_EQ(one_based(g.outgoing_links(NodeId{2})), (std::set<std::size_t>{3, 8, 18}));
  EXPECT_EQ(one_based(g.outgoing_links(NodeId{3})), (std::set<std::size_t>{6, 9, 10, 11}));
  EXPECT_EQ(one_based(g.outgoing_links(NodeId{4})), (std::set<std::size_t>{15, 17}));
}

TEST(Topology, OutgoingLinksOfUserIsDomainError) {
  const TopologyGraph g = two_cell_example();
  EXPECT_THROW(g.outgoing_links(NodeId{6}), DomainError);
}

TEST(Topology, IsolatedBsHasNoOutgoingLinks) {
  Builder b;
  auto m = b.macro("m");
  auto p = b.pico("p");
  auto u = b.mu("u");
  b.link(m, u);
  b.flow(m, u);
  EXPECT_TRUE(b.build().outgoing_links(p).empty());
}

TEST(Topology, RandomGraphsCountAndColumnSums) {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    Builder b;
    const std::size_t nb = 2 + trial % 5, nu = 1 + trial % 4;
    std::vector<NodeId> bs, us;
    for (std::size_t i = 0; i < nb; ++i) {
      bs.push_back(i == 0 ? b.macro("m") : b.pico("p" + std::to_string(i)));
    }
    for (std::size_t i = 0; i < nu; ++i) us.push_back(b.mu("u" + std::to_string(i)));
    auto pick = [&](std::uint32_t k, std::size_t n) {
      return static_cast<std::size_t>(rng::uniform(trial, rng::Stream::validation_channel, k) * n) % n;
    };
    std::uint32_t k = 0;
    for (NodeId u : us) b.link(bs[pick(k++, nb)], u);
    for (std::size_t extra = 0; extra < 2 * nb; ++extra) {
      const NodeId h = bs[pick(k++, nb)];
      const bool to_user = pick(k++, 2) == 0;
      const NodeId t = to_user ? us[pick(k++, nu)] : bs[pick(k++, nb)];
      if (t != h) b.link(h, t);
    }
    const TopologyGraph g = b.build();
    std::size_t total = 0;
    for (NodeId n : g.base_stations()) total += g.outgoing_links(n).size();
    EXPECT_EQ(total, g.num_links());
    const Eigen::MatrixXi G = build_incidence(g);
    for (Eigen::Index l = 0; l < G.cols(); ++l) {
      EXPECT_EQ(G.col(l).sum(), 0);
      EXPECT_EQ(G.col(l).maxCoeff(), 1);
      EXPECT_EQ(G.col(l).minCoeff(), -1);
      EXPECT_EQ(G.col(l).cwiseAbs().sum(), 2);
    }
  }
}

TEST(Topology, PathFlowMatchesDivergence) {
  Builder b;
  auto m = b.macro("m");
  auto p = b.pico("p");
  auto u = b.mu("u");
  b.link(m, p);
  b.link(p, u);
  b.link(m, u);
  b.flow(m, u);
  const TopologyGraph g = b.build();
  const Eigen::MatrixXd G = build_incidence(g).cast<double>();
  Eigen::VectorXd x(3);
  x << 0.7, 0.7, 0.0;
  const Eigen::VectorXd v = flow_divergence(g, FlowId{0}, 0.7);
  EXPECT_LT((G * x - v).lpNorm<Eigen::Infinity>(), 1e-15);
  EXPECT_DOUBLE_EQ(v(0), 0.7);
  EXPECT_DOUBLE_EQ(v(2), -0.7);
}

TEST(Topology, ValidateReportsUserWithOutgoingLink) {
  Builder b;
  auto m = b.macro("m");
  auto u = b.mu("u");
  auto v = b.mu("v");
  b.link(m, u);
  b.link(u, v);
  b.flow(m, u);
  const auto vs = validate(b.build());
  EXPECT_TRUE(std::any_of(vs.begin(), vs.end(), [](const Violation& x) { return x.rule == "MU has outgoing link"; }));
}

TEST(Topology, ValidateReportsUnreachableFlow) {
  Builder b;
  auto m = b.macro("m");
  auto p = b.pico("p");
  auto u = b.mu("u");
  auto w = b.mu("w");
  b.link(m, u);
  b.link(p, w);
  b.flow(m, w);
  const auto vs = validate(b.build());
  EXPECT_TRUE(std::any_of(vs.begin(), vs.end(), [](const Violation& x) { return x.rule == "flow 0 unreachable"; }));
}

TEST(Topology, GeometricConflictsAreSymmetricAndIrreflexive) {
  std::vector<Node> nodes{{"m", NodeKind::macro_bs, 0, 0},
                          {"p1", NodeKind::pico_bs, 300, 0},
                          {"p2", NodeKind::pico_bs, 380, 0},
                          {"p3", NodeKind::pico_bs, 900, 0},
                          {"u", NodeKind::mobile_user, 10, 0}};
  const auto pairs = geometric_conflicts(nodes, CoverageRadii{500.0, 100.0});
  Builder b;
  b.nodes = nodes;
  b.backhaul = {NodeId{0}};
  b.conflicts = pairs;
  const TopologyGraph g = b.build();
  // Macro covers p1 and p2; p1 and p2 are within the pico radius; p3 is far.
  EXPECT_TRUE(g.conflicting(0, 1));
  EXPECT_TRUE(g.conflicting(0, 2));
  EXPECT_TRUE(g.conflicting(1, 2));
  EXPECT_FALSE(g.conflicting(0, 3));
  EXPECT_FALSE(g.conflicting(2, 3));
  for (std::size_t a = 0; a < 4; ++a) {
    EXPECT_FALSE(g.conflicting(a, a));
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(g.conflicting(a, c), g.conflicting(c, a));
  }
}
