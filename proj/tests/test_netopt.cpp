#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "hetrrm/netopt.hpp"
#include "hetrrm/phy.hpp"
#include "test_support.hpp"

using namespace hetrrm;
using hetrrm::testing::Builder;

namespace {

const UtilitySpec kPfs{1.0, 1e-3};

TopologyGraph single_link() {
  Builder b;
  auto m = b.macro("m");
  auto u = b.mu("u");
  b.link(m, u);
  b.flow(m, u);
  return b.build();
}

// s -> a -> d and s -> b -> d, all links distinct.
TopologyGraph diamond() {
  Builder b;
  auto s = b.macro("s");
  auto a = b.pico("a");
  auto c = b.pico("b");
  auto d = b.mu("d");
  b.link(s, a);
  b.link(s, c);
  b.link(a, d);
  b.link(c, d);
  b.flow(s, d);
  return b.build();
}

// One relay feeding two users.
TopologyGraph shared_relay() {
  Builder b;
  auto s = b.macro("s");
  auto p = b.pico("p");
  auto u1 = b.mu("u1");
  auto u2 = b.mu("u2");
  b.link(s, p);
  b.link(p, u1);
  b.link(p, u2);
  b.flow(s, u1);
  b.flow(s, u2);
  return b.build();
}

}  // namespace

TEST(NetOpt, SingleLinkSaturates) {
  const auto g = single_link();
  const std::vector<double> c{2.5};
  const auto sol = solve_p1(g, c, kPfs);
  EXPECT_TRUE(sol.converged);
  EXPECT_NEAR(sol.d[0], 2.5, 1e-8);
  EXPECT_NEAR(sol.lambda[0], 1.0 / (2.5 + 1e-3), 1e-7);
  EXPECT_NEAR(sol.utility, std::log(2.5 + 1e-3), 1e-9);
  EXPECT_LE(flow_infeasibility(g, sol, c), 1e-8);
}

TEST(NetOpt, TinyCapacitiesStillSaturate) {
  const auto g = single_link();
  for (double cap : {1e-4, 6.8e-5, 1e-6}) {
    const auto sol = solve_p1(g, std::vector<double>{cap}, kPfs);
    EXPECT_TRUE(sol.converged) << cap;
    EXPECT_NEAR(sol.d[0], cap, 1e-6 * cap) << cap;
    EXPECT_NEAR(sol.lambda[0], 1.0 / (cap + 1e-3), 1e-5 / (cap + 1e-3)) << cap;
  }
}

TEST(NetOpt, DiamondMatchesGridOracle) {
  const auto g = diamond();
  const std::vector<double> c{2.0, 1.0, 0.7, 3.0};
  // Independent oracle: the two paths are disjoint, so the max flow is the
  // sum of the path bottlenecks; scan a grid of path splits.
  double best = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    for (int j = 0; j <= 2000; ++j) {
      const double t1 = 2.0 * i / 2000.0;
      const double t2 = 2.0 * j / 2000.0;
      if (t1 <= std::min(c[0], c[2]) + 1e-12 && t2 <= std::min(c[1], c[3]) + 1e-12) best = std::max(best, t1 + t2);
    }
  }
  const auto sol = solve_p1(g, c, kPfs);
  EXPECT_NEAR(sol.d[0], best, 1e-6);
  EXPECT_LE(flow_infeasibility(g, sol, c), 1e-8);
}

TEST(NetOpt, SharedRelaySplitsEvenly) {
  const auto g = shared_relay();
  const std::vector<double> c{3.0, 5.0, 5.0};
  const auto sol = solve_p1(g, c, kPfs);
  EXPECT_NEAR(sol.d[0], 1.5, 1e-7);
  EXPECT_NEAR(sol.d[1], 1.5, 1e-7);
  EXPECT_NEAR(sol.lambda[0], 1.0 / (1.5 + 1e-3), 1e-6);
  EXPECT_NEAR(sol.lambda[1], 0.0, 1e-6);
  EXPECT_NEAR(sol.lambda[2], 0.0, 1e-6);
}

TEST(NetOpt, PricesMatchFiniteDifferences) {
  const auto g = shared_relay();
  const std::vector<double> c{3.0, 1.0, 5.0};
  const auto sol = solve_p1(g, c, kPfs);
  const auto fd = finite_diff_gradient(g, c, kPfs, 1e-4);
  for (std::size_t l = 0; l < c.size(); ++l) EXPECT_NEAR(sol.lambda[l], fd[l], 1e-3) << "link " << l;
}

TEST(NetOpt, ZeroCapacityLinkGetsSupergradientPrice) {
  const auto g = single_link();
  const std::vector<double> c{0.0};
  const auto sol = solve_p1(g, c, kPfs);
  EXPECT_EQ(sol.d[0], 0.0);
  EXPECT_NEAR(sol.lambda[0], 1.0 / 1e-3, 1e-9);
}

TEST(NetOpt, TimeSharingOverTwoRows) {
  // Two rows serving the two hops of a chain alternately.
  Builder b;
  auto s = b.macro("s");
  auto p = b.pico("p");
  auto u = b.mu("u");
  b.link(s, p);
  b.link(p, u);
  b.flow(s, u);
  const auto g = b.build();
  const std::vector<std::vector<double>> rows{{4.0, 0.0}, {0.0, 2.0}};
  // Oracle: d(q) = min(4 q, 2 (1 - q)), maximised at q = 1/3.
  const auto ip = optimize_time_sharing(g, rows, kPfs);
  EXPECT_NEAR(ip.q[0], 1.0 / 3.0, 1e-6);
  EXPECT_NEAR(ip.flow.d[0], 4.0 / 3.0, 1e-6);
  EXPECT_LE(ip.gap, 1e-6);
  TimeSharingOptions fw;
  fw.method = TimeSharingMethod::frank_wolfe;
  const auto f = optimize_time_sharing(g, rows, kPfs, fw);
  EXPECT_NEAR(f.flow.utility, ip.flow.utility, 1e-4);
}

TEST(NetOpt, RejectsBadInput) {
  const auto g = single_link();
  EXPECT_THROW(solve_p1(g, std::vector<double>{-1.0}, kPfs), DomainError);
  EXPECT_THROW(solve_p1(g, std::vector<double>{1.0, 2.0}, kPfs), DomainError);
  EXPECT_THROW(optimize_time_sharing(g, {}, kPfs), DomainError);
}

TEST(NetOpt, UtilityValues) {
  EXPECT_NEAR((UtilitySpec{1.0, 0.5}).value(std::exp(1.0) - 0.5), 1.0, 1e-15);
  EXPECT_NEAR((UtilitySpec{2.0, 0.5}).value(1.5), -0.5, 1e-15);
  for (double alpha : {0.0, 0.5, 1.0, 2.0, 3.5}) {
    const UtilitySpec u{alpha, 1e-2};
    EXPECT_NEAR(utility_gradient(u, std::vector<double>{0.0})[0], std::pow(1e-2, -alpha), 1e-9 * std::pow(1e-2, -alpha));
    for (double d : {0.05, 0.3, 1.7, 12.0}) {
      const double h = 1e-5 * d;
      const double fd = (u.value(d + h) - u.value(d - h)) / (2.0 * h);
      EXPECT_NEAR(utility_gradient(u, std::vector<double>{d})[0], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(NetOpt, ZeroCapacitiesGiveZeroFlow) {
  const auto g = shared_relay();
  const auto sol = solve_p1(g, std::vector<double>(3, 0.0), kPfs);
  EXPECT_EQ(sol.d[0], 0.0);
  EXPECT_EQ(sol.d[1], 0.0);
  EXPECT_NEAR(sol.utility, 2.0 * std::log(1e-3), 1e-12);
}

TEST(NetOpt, SingleLinkFiniteDifference) {
  const auto g = single_link();
  const auto fd = finite_diff_gradient(g, std::vector<double>{1.0}, kPfs, 1e-4);
  EXPECT_NEAR(fd[0], 1.0 / (1.0 + 1e-3), 1e-3);
}

TEST(NetOpt, DiamondPricesAndSlackLinks) {
  const auto g = diamond();
  // Path s-a-d is limited by link 2, path s-b-d by link 1.
  const std::vector<double> c{2.0, 1.0, 0.7, 3.0};
  const auto sol = solve_p1(g, c, kPfs);
  const auto fd = finite_diff_gradient(g, c, kPfs, 1e-4);
  for (std::size_t l = 0; l < c.size(); ++l) EXPECT_NEAR(sol.lambda[l], fd[l], 1e-3) << "link " << l;
  EXPECT_NEAR(fd[0], 0.0, 1e-6);
  EXPECT_NEAR(fd[3], 0.0, 1e-6);
  for (std::size_t l = 0; l < c.size(); ++l) {
    EXPECT_GE(sol.lambda[l], 0.0);
    EXPECT_LE(sol.lambda[l] * (c[l] - sol.x.col(static_cast<Eigen::Index>(l)).sum()), 1e-7);
  }
}

TEST(NetOpt, AlphaTwoSharedRelay) {
  const auto g = shared_relay();
  const UtilitySpec u{2.0, 1e-3};
  const std::vector<double> c{3.0, 0.5, 5.0};
  const auto sol = solve_p1(g, c, u);
  // Flow 0 is capped by its last hop at 0.5; flow 1 takes the rest of the relay.
  EXPECT_NEAR(sol.d[0], 0.5, 1e-6);
  EXPECT_NEAR(sol.d[1], 2.5, 1e-6);
  EXPECT_NEAR(sol.lambda[0], std::pow(2.5 + 1e-3, -2.0), 1e-6);
  EXPECT_NEAR(sol.lambda[1], std::pow(0.5 + 1e-3, -2.0) - std::pow(2.5 + 1e-3, -2.0), 1e-5);
  EXPECT_LE(flow_infeasibility(g, sol, c), 1e-8);
}

TEST(NetOpt, ConcaveAndMonotoneInCapacity) {
  const auto g = shared_relay();
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> U(0.0, 4.0), T(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(3), b(3), m(3);
    for (std::size_t l = 0; l < 3; ++l) {
      a[l] = U(gen);
      b[l] = U(gen);
    }
    const double th = T(gen);
    for (std::size_t l = 0; l < 3; ++l) m[l] = th * a[l] + (1.0 - th) * b[l];
    const double ua = solve_p1(g, a, kPfs).utility, ub = solve_p1(g, b, kPfs).utility;
    EXPECT_GE(solve_p1(g, m, kPfs).utility, th * ua + (1.0 - th) * ub - 1e-7);
    std::vector<double> up = a;
    up[trial % 3] += 0.5;
    EXPECT_GE(solve_p1(g, up, kPfs).utility, ua - 1e-8);
  }
}

TEST(NetOpt, SingleAndIdenticalRows) {
  const auto g = shared_relay();
  const std::vector<double> row{3.0, 1.0, 5.0};
  const auto one = optimize_time_sharing(g, {row}, kPfs);
  ASSERT_EQ(one.q.size(), 1u);
  EXPECT_DOUBLE_EQ(one.q[0], 1.0);
  const auto two = optimize_time_sharing(g, {row, row}, kPfs);
  EXPECT_NEAR(two.q[0] + two.q[1], 1.0, 1e-12);
  EXPECT_NEAR(two.flow.utility, one.flow.utility, 1e-9);
}

TEST(NetOpt, EqualHopRowsSplitEvenly) {
  Builder b;
  auto s = b.macro("s");
  auto p = b.pico("p");
  auto u = b.mu("u");
  b.link(s, p);
  b.link(p, u);
  b.flow(s, u);
  const auto g = b.build();
  const double c = 3.0;
  const std::vector<std::vector<double>> rows{{c, 0.0}, {0.0, c}};
  double grid_best = -1e300, grid_q = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double q = i / 1000.0;
    const double v = solve_p1(g, std::vector<double>{q * c, (1.0 - q) * c}, kPfs).utility;
    if (v > grid_best) {
      grid_best = v;
      grid_q = q;
    }
  }
  const auto ts = optimize_time_sharing(g, rows, kPfs);
  EXPECT_NEAR(ts.q[0], 0.5, 1e-6);
  EXPECT_NEAR(grid_q, 0.5, 1e-3);
  EXPECT_NEAR(ts.flow.d[0], c / 2.0, 1e-6);
  EXPECT_NEAR(ts.flow.utility, grid_best, 1e-6);
}

TEST(NetOpt, FrankWolfeAscendsAndIsBoundedByTheOptimum) {
  // Kinked objective: single-vertex steps may stall, but never descend or
  // exceed the joint optimum.
  const auto g = shared_relay();
  const std::vector<std::vector<double>> rows{{4.0, 0.0, 0.0}, {0.0, 3.0, 0.0}, {0.0, 0.0, 2.0}, {1.0, 1.0, 1.0}};
  TimeSharingOptions fw;
  fw.method = TimeSharingMethod::frank_wolfe;
  fw.gap_tolerance = 1e-7;
  std::vector<double> trace;
  const auto f = frank_wolfe_time_sharing(g, rows, kPfs, fw, &trace);
  ASSERT_GE(trace.size(), 2u);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_GE(trace[i], trace[i - 1] - 1e-10);
  const auto ip = optimize_time_sharing(g, rows, kPfs);
  EXPECT_LE(f.flow.utility, ip.flow.utility + 1e-9);
  EXPECT_TRUE(on_simplex(ip.q, 1e-9));
  EXPECT_TRUE(on_simplex(f.q, 1e-9));
}

TEST(NetOpt, FrankWolfeReachesTheOptimumOnSmoothObjective) {
  // Independent single-hop flows: the utility is smooth in the rates.
  Builder b;
  auto m = b.macro("m");
  auto u1 = b.mu("u1");
  auto u2 = b.mu("u2");
  auto u3 = b.mu("u3");
  b.link(m, u1);
  b.link(m, u2);
  b.link(m, u3);
  b.flow(m, u1);
  b.flow(m, u2);
  b.flow(m, u3);
  const auto g = b.build();
  const std::vector<std::vector<double>> rows{{4.0, 0.0, 0.0}, {0.0, 3.0, 0.0}, {0.0, 0.0, 2.0}, {1.0, 1.0, 1.0}};
  TimeSharingOptions fw;
  fw.method = TimeSharingMethod::frank_wolfe;
  fw.gap_tolerance = 1e-7;
  fw.max_iterations = 5000;
  std::vector<double> trace;
  const auto f = frank_wolfe_time_sharing(g, rows, kPfs, fw, &trace);
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_GE(trace[i], trace[i - 1] - 1e-10);
  const auto ip = optimize_time_sharing(g, rows, kPfs);
  EXPECT_NEAR(f.flow.utility, ip.flow.utility, 1e-4);
}
