#pragma once

// Flow control and multi-path routing under average link capacities.
//
// The core is one concave program over (q, d, x):
//
//   max  sum_k U_k(d_k)
//   s.t. G x_k = v_k(d_k)                 for every flow k
//        sum_k x_{k,l} <= sum_j q_j R_{j,l} for every link l
//        q on the simplex, d >= 0, x >= 0
//
// With a single rate row it is the fixed-capacity routing problem; with
// several rows it is the time-sharing problem over a set of PHY columns. It
// is solved by a primal-dual interior-point method whose capacity-row
// multipliers are the link prices lambda.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <queue>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "hetrrm/ids.hpp"
#include "hetrrm/topology.hpp"
#include "hetrrm/utility.hpp"

namespace hetrrm {

struct SolverOptions {
  double tolerance = 1e-9;  // relative KKT residual at which the interior-point loop stops
  int max_iterations = 200;
  // Rows whose time share ends below this are dropped and the program is
  // solved again; their near-zero capacities otherwise leave link prices
  // undetermined.
  double row_floor = 1e-8;
};

struct FlowSolution {
  std::vector<double> d;        // flow rates, nats per subframe
  Eigen::MatrixXd x;            // K x L routing
  std::vector<double> lambda;   // link prices
  double utility = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct TimeSharingSolution {
  std::vector<double> q;
  std::vector<double> rbar;  // sum_j q_j R_j
  FlowSolution flow;
  int iterations = 0;        // outer iterations (Frank-Wolfe) or interior-point iterations
  double gap = 0.0;          // max_j (R lambda)_j - q^T R lambda at return
};

namespace detail {

// min phi(z) = -sum U(z_v) over the flow-rate variables, s.t. A z = b, z >= 0.
struct InteriorPointProblem {
  std::size_t rows = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> cols;
  std::vector<double> b;
  std::vector<std::size_t> utility_vars;
  std::vector<double> z0;
  std::vector<double> s0;
};

struct InteriorPointResult {
  std::vector<double> z;
  std::vector<double> y;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline InteriorPointResult interior_point(const InteriorPointProblem& p, const UtilitySpec& u,
                                          const SolverOptions& opt) {
  const std::size_t n = p.cols.size();
  const std::size_t m = p.rows;
  using Vec = Eigen::VectorXd;
  Vec z = Eigen::Map<const Vec>(p.z0.data(), static_cast<Eigen::Index>(n));
  Vec s = Eigen::Map<const Vec>(p.s0.data(), static_cast<Eigen::Index>(n));
  Vec y = Vec::Zero(static_cast<Eigen::Index>(m));
  const Vec b = Eigen::Map<const Vec>(p.b.data(), static_cast<Eigen::Index>(m));
  const double b_norm = b.size() ? b.lpNorm<Eigen::Infinity>() : 0.0;

  std::vector<char> is_util(n, 0);
  for (std::size_t v : p.utility_vars) is_util[v] = 1;

  auto times_a = [&](const Vec& v) {
    Vec out = Vec::Zero(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < n; ++j) {
      for (auto [r, c] : p.cols[j]) out(static_cast<Eigen::Index>(r)) += c * v(static_cast<Eigen::Index>(j));
    }
    return out;
  };
  auto times_at = [&](const Vec& w) {
    Vec out = Vec::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (auto [r, c] : p.cols[j]) acc += c * w(static_cast<Eigen::Index>(r));
      out(static_cast<Eigen::Index>(j)) = acc;
    }
    return out;
  };
  auto max_step = [](const Vec& v, const Vec& dv) {
    double a = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
    }
    return a;
  };

  InteriorPointResult res;
  double best_residual = std::numeric_limits<double>::infinity();
  Vec best_z = z, best_y = y;
  Vec grad(static_cast<Eigen::Index>(n));
  Vec hess(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd normal(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  for (int it = 0; it <= opt.max_iterations; ++it) {
    grad.setZero();
    hess.setZero();
    for (std::size_t v : p.utility_vars) {
      const auto i = static_cast<Eigen::Index>(v);
      grad(i) = -u.derivative(z(i));
      hess(i) = -u.second_derivative(z(i));
    }
    const Vec rp = times_a(z) - b;
    const Vec rd = grad - times_at(y) - s;
    const double mu = z.dot(s) / static_cast<double>(n);
    const double g_norm = grad.size() ? grad.lpNorm<Eigen::Infinity>() : 0.0;
    const double y_norm = y.size() ? y.lpNorm<Eigen::Infinity>() : 0.0;
    double row_scale = b_norm;
    {
      Vec mag = Vec::Zero(static_cast<Eigen::Index>(m));
      for (std::size_t j = 0; j < n; ++j) {
        for (auto [r, c] : p.cols[j]) mag(static_cast<Eigen::Index>(r)) += std::abs(c * z(static_cast<Eigen::Index>(j)));
      }
      if (m) row_scale = std::max(row_scale, mag.maxCoeff());
    }
    const double p_res = (rp.size() ? rp.lpNorm<Eigen::Infinity>() : 0.0) / (1.0 + row_scale);
    const double d_res = rd.lpNorm<Eigen::Infinity>() / (1.0 + g_norm + y_norm);
    const double c_res = mu / (1.0 + g_norm + y_norm);
    const double residual = std::max({p_res, d_res, c_res});
    res.iterations = it;
    if (residual < best_residual) {
      best_residual = residual;
      best_z = z;
      best_y = y;
    }
    if (residual <= opt.tolerance) {
      res.converged = true;
      break;
    }
    if (it == opt.max_iterations) break;

    const Vec dinv = (hess.array() + s.array() / z.array()).inverse().matrix();
    normal.setZero();
    for (std::size_t j = 0; j < n; ++j) {
      const double w = dinv(static_cast<Eigen::Index>(j));
      const auto& col = p.cols[j];
      for (std::size_t a = 0; a < col.size(); ++a) {
        const double ca = col[a].second * w;
        for (std::size_t c = 0; c < col.size(); ++c) {
          normal(static_cast<Eigen::Index>(col[a].first), static_cast<Eigen::Index>(col[c].first)) +=
              ca * col[c].second;
        }
      }
    }
    const double diag_max = normal.diagonal().cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < normal.rows(); ++r) {
      normal(r, r) += 1e-13 * std::abs(normal(r, r)) + 1e-30 * std::max(1.0, diag_max);
    }
    const Eigen::LDLT<Eigen::MatrixXd> factor(normal);

    // Newton direction for complementarity target t (z.*s -> z.*s + t).
    auto direction = [&](const Vec& t, Vec& dz, Vec& dy, Vec& ds) {
      const Vec g = -rd + (t.array() / z.array()).matrix();
      const Vec rhs = -rp - times_a((g.array() * dinv.array()).matrix());
      dy = factor.solve(rhs);
      dz = ((g + times_at(dy)).array() * dinv.array()).matrix();
      // Iterative refinement against the unregularised primal equation.
      for (int round = 0; round < 3; ++round) {
        const Vec r1 = -rp - times_a(dz);
        if (r1.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + row_scale)) break;
        const Vec fix = factor.solve(r1);
        dy += fix;
        dz += (times_at(fix).array() * dinv.array()).matrix();
      }
      ds = ((t - (s.array() * dz.array()).matrix()).array() / z.array()).matrix();
    };

    Vec dz, dy, ds;
    const Vec zs = (z.array() * s.array()).matrix();
    direction(-zs, dz, dy, ds);
    const double ap_aff = max_step(z, dz);
    const double ad_aff = max_step(s, ds);
    const double mu_aff = (z + ap_aff * dz).dot(s + ad_aff * ds) / static_cast<double>(n);
    const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);
    // Centring target, kept just under the stopping threshold so that
    // complementarity cannot outrun feasibility.
    const double mu_target = std::max(sigma * mu, 1e-4 * opt.tolerance * (1.0 + g_norm + y_norm));
    const Vec target = (Vec::Constant(static_cast<Eigen::Index>(n), mu_target) - zs -
                        (dz.array() * ds.array()).matrix());
    const double eta = std::clamp(1.0 - 10.0 * mu, 0.95, 0.9999);
    // Longest step that stays in a wide neighbourhood of the central path:
    // no product z_i s_i may fall far below the average. A badly centred
    // start (tiny capacities) gets a looser bound until it recovers.
    const double spread = zs.minCoeff() / mu;
    const double wide = std::min(1e-3, 0.5 * spread);
    auto step = [&]() {
      double a = std::min({1.0, eta * max_step(z, dz), eta * max_step(s, ds)});
      for (; a > 1e-14; a *= 0.8) {
        const Vec zn = z + a * dz;
        const Vec sn = s + a * ds;
        const Vec prod = (zn.array() * sn.array()).matrix();
        if (prod.minCoeff() >= wide * prod.sum() / static_cast<double>(n)) break;
      }
      return a;
    };
    direction(target, dz, dy, ds);
    if (!dz.allFinite() || !dy.allFinite()) break;
    double alpha = step();
    if (alpha < 0.1) {
      // The corrector is unreliable far from the path; take a plain
      // centring step instead.
      direction((Vec::Constant(static_cast<Eigen::Index>(n), std::max(0.5 * mu, mu_target)) - zs), dz, dy, ds);
      if (!dz.allFinite() || !dy.allFinite()) break;
      alpha = step();
    }
    if (!(alpha > 1e-14)) break;
    z += alpha * dz;
    y += alpha * dy;
    s += alpha * ds;
  }
  res.residual = best_residual;
  res.z.assign(best_z.data(), best_z.data() + best_z.size());
  res.y.assign(best_y.data(), best_y.data() + best_y.size());
  return res;
}

// Dijkstra over non-negative link costs; forward from `start`, or backward
// (distances *to* `start`) when `forward` is false.
inline std::vector<double> shortest_distances(const TopologyGraph& g, NodeId start, std::span<const double> cost,
                                              bool forward) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(g.num_nodes(), inf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[start.value] = 0.0;
  pq.emplace(0.0, start.value);
  while (!pq.empty()) {
    auto [du, u] = pq.top();
    pq.pop();
    if (du > dist[u]) continue;
    for (std::size_t l = 0; l < g.num_links(); ++l) {
      const Link& link = g.links()[l];
      const std::size_t from = forward ? link.head.value : link.tail.value;
      const std::size_t to = forward ? link.tail.value : link.head.value;
      if (from != u) continue;
      const double nd = du + std::max(0.0, cost[l]);
      if (nd < dist[to]) {
        dist[to] = nd;
        pq.emplace(nd, to);
      }
    }
  }
  return dist;
}

}  // namespace detail

// max_j (R lambda)_j - q^T R lambda: the first-order gap of q over the rows.
inline double gap_over_rows(const std::vector<std::vector<double>>& rows, std::span<const double> q,
                            std::span<const double> lambda) {
  double best = -std::numeric_limits<double>::infinity();
  double avg = 0.0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    double v = 0.0;
    for (std::size_t l = 0; l < lambda.size(); ++l) v += rows[j][l] * lambda[l];
    best = std::max(best, v);
    avg += q[j] * v;
  }
  return best - avg;
}

// Solves the flow program over the convex hull of `rate_rows` (each row a
// per-link capacity vector). A single row gives the fixed-capacity problem.
inline TimeSharingSolution solve_flow_program(const TopologyGraph& g, const std::vector<std::vector<double>>& rate_rows,
                                              const UtilitySpec& utility, const SolverOptions& opt = {}) {
  utility.check();
  const std::size_t J = rate_rows.size();
  const std::size_t L = g.num_links();
  const std::size_t K = g.num_flows();
  if (J == 0) throw DomainError("solve_flow_program: empty rate table");
  for (const auto& row : rate_rows) {
    if (row.size() != L) throw DomainError("solve_flow_program: rate row length differs from link count");
    for (double v : row) {
      if (!std::isfinite(v) || v < 0.0) throw DomainError("solve_flow_program: capacities must be finite and >= 0");
    }
  }

  std::vector<double> cap_max(L, 0.0);
  for (const auto& row : rate_rows) {
    for (std::size_t l = 0; l < L; ++l) cap_max[l] = std::max(cap_max[l], row[l]);
  }
  // std::vector<bool> is not contiguous, hence the array.
  const auto usable = std::make_unique<bool[]>(L ? L : 1);
  for (std::size_t l = 0; l < L; ++l) usable[l] = cap_max[l] > 0.0;

  std::vector<std::vector<LinkId>> sub(K);
  std::vector<bool> active(K, false);
  std::vector<bool> used(L, false);
  for (std::size_t k = 0; k < K; ++k) {
    const Flow& f = g.flows()[k];
    if (f.source == f.destination) continue;
    sub[k] = g.links_on_paths(f.source, f.destination, std::span<const bool>(usable.get(), L));
    active[k] = !sub[k].empty();
    for (LinkId l : sub[k]) used[l.value] = true;
  }

  // Variable layout: q | d (active flows) | x (per active flow, its links) | slack (capacity rows).
  detail::InteriorPointProblem prob;
  std::vector<std::size_t> d_var(K, SIZE_MAX);
  std::vector<std::vector<std::size_t>> x_var(K);
  std::vector<std::size_t> cap_row(L, SIZE_MAX);
  std::size_t rows = 0;
  std::vector<std::vector<std::size_t>> node_row(K);
  for (std::size_t k = 0; k < K; ++k) {
    if (!active[k]) continue;
    node_row[k].assign(g.num_nodes(), SIZE_MAX);
    for (LinkId l : sub[k]) {
      for (NodeId n : {g.link(l).head, g.link(l).tail}) {
        if (n != g.flows()[k].source && node_row[k][n.value] == SIZE_MAX) node_row[k][n.value] = rows++;
      }
    }
  }
  for (std::size_t l = 0; l < L; ++l) {
    if (used[l]) cap_row[l] = rows++;
  }
  const std::size_t simplex_row = rows++;
  prob.rows = rows;
  prob.b.assign(rows, 0.0);
  prob.b[simplex_row] = 1.0;

  double scale = 0.0;
  std::size_t scale_n = 0;
  for (std::size_t l = 0; l < L; ++l) {
    if (used[l]) {
      scale += cap_max[l];
      ++scale_n;
    }
  }
  scale = scale_n ? scale / static_cast<double>(scale_n) : 1.0;
  const double dual_scale = std::max(1e-6, utility.derivative(scale));

  auto add_var = [&](double z0) {
    prob.cols.emplace_back();
    prob.z0.push_back(z0);
    prob.s0.push_back(dual_scale);
    return prob.cols.size() - 1;
  };
  for (std::size_t j = 0; j < J; ++j) {
    const std::size_t v = add_var(1.0 / static_cast<double>(J));
    prob.cols[v].emplace_back(simplex_row, 1.0);
    for (std::size_t l = 0; l < L; ++l) {
      if (used[l] && rate_rows[j][l] != 0.0) prob.cols[v].emplace_back(cap_row[l], -rate_rows[j][l]);
    }
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (!active[k]) continue;
    d_var[k] = add_var(0.1 * scale);
    prob.utility_vars.push_back(d_var[k]);
    prob.cols[d_var[k]].emplace_back(node_row[k][g.flows()[k].destination.value], 1.0);
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (!active[k]) continue;
    for (LinkId l : sub[k]) {
      const std::size_t v = add_var(0.1 * scale);
      x_var[k].push_back(v);
      const Link& link = g.link(l);
      if (node_row[k][link.head.value] != SIZE_MAX) prob.cols[v].emplace_back(node_row[k][link.head.value], 1.0);
      if (node_row[k][link.tail.value] != SIZE_MAX) prob.cols[v].emplace_back(node_row[k][link.tail.value], -1.0);
      prob.cols[v].emplace_back(cap_row[l.value], 1.0);
    }
  }
  for (std::size_t l = 0; l < L; ++l) {
    if (!used[l]) continue;
    const std::size_t v = add_var(0.5 * scale);
    prob.cols[v].emplace_back(cap_row[l], 1.0);
  }

  const detail::InteriorPointResult ipm = detail::interior_point(prob, utility, opt);

  TimeSharingSolution out;
  out.iterations = ipm.iterations;
  out.q.resize(J);
  double qsum = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    out.q[j] = std::max(0.0, ipm.z[j]);
    qsum += out.q[j];
  }
  for (double& v : out.q) v /= qsum;

  if (J > 1) {
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < J; ++j) {
      if (out.q[j] >= opt.row_floor) keep.push_back(j);
    }
    if (ipm.converged && !keep.empty() && keep.size() < J) {
      std::vector<std::vector<double>> kept;
      for (std::size_t j : keep) kept.push_back(rate_rows[j]);
      TimeSharingSolution sub_sol = solve_flow_program(g, kept, utility, opt);
      out.q.assign(J, 0.0);
      for (std::size_t i = 0; i < keep.size(); ++i) out.q[keep[i]] = sub_sol.q[i];
      out.rbar = std::move(sub_sol.rbar);
      out.flow = std::move(sub_sol.flow);
      out.iterations += sub_sol.iterations;
      out.gap = gap_over_rows(rate_rows, out.q, out.flow.lambda);
      return out;
    }
  }

  FlowSolution& fs = out.flow;
  fs.d.assign(K, 0.0);
  fs.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(L));
  for (std::size_t k = 0; k < K; ++k) {
    if (!active[k]) continue;
    fs.d[k] = std::max(0.0, ipm.z[d_var[k]]);
    for (std::size_t i = 0; i < sub[k].size(); ++i) {
      fs.x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(sub[k][i].value)) =
          std::max(0.0, ipm.z[x_var[k][i]]);
    }
  }
  fs.lambda.assign(L, 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    if (used[l]) fs.lambda[l] = std::max(0.0, -ipm.y[cap_row[l]]);
  }
  // Links without capacity carry nothing; price each at the one-sided
  // derivative of adding capacity to it alone: the flow's marginal utility
  // minus the cheapest path through it, other empty links being unavailable.
  // A flow with no usable path at all gains nothing from any single link, so
  // for it the other empty links count as free instead.
  std::vector<double> blocked(L, std::numeric_limits<double>::infinity());
  std::vector<double> open(L, 0.0);
  for (std::size_t l = 0; l < L; ++l) {
    if (usable[l]) blocked[l] = open[l] = fs.lambda[l];
  }
  for (std::size_t k = 0; k < K; ++k) {
    const Flow& f = g.flows()[k];
    if (f.source == f.destination) continue;
    const std::vector<double>& cost = active[k] ? blocked : open;
    const auto from_src = detail::shortest_distances(g, f.source, cost, true);
    const auto to_dst = detail::shortest_distances(g, f.destination, cost, false);
    const double marginal = utility.derivative(fs.d[k]);
    for (std::size_t l = 0; l < L; ++l) {
      if (usable[l]) continue;
      const double via = from_src[g.links()[l].head.value] + to_dst[g.links()[l].tail.value];
      if (std::isfinite(via)) fs.lambda[l] = std::max(fs.lambda[l], marginal - via);
    }
  }
  fs.utility = 0.0;
  for (std::size_t k = 0; k < K; ++k) fs.utility += utility.value(fs.d[k]);
  fs.kkt_residual = ipm.residual;
  fs.iterations = ipm.iterations;
  fs.converged = ipm.converged;

  out.rbar.assign(L, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t l = 0; l < L; ++l) out.rbar[l] += out.q[j] * rate_rows[j][l];
  }
  out.gap = gap_over_rows(rate_rows, out.q, fs.lambda);
  return out;
}

// Fixed-capacity routing problem: returns flows, routing, prices and the
// optimal utility at capacity vector `rbar`.
inline FlowSolution solve_p1(const TopologyGraph& g, std::span<const double> rbar, const UtilitySpec& utility,
                             const SolverOptions& opt = {}) {
  return solve_flow_program(g, {std::vector<double>(rbar.begin(), rbar.end())}, utility, opt).flow;
}

// Central-difference estimate of the gradient of the optimal utility with
// respect to link capacity (one-sided where a capacity is below h).
inline std::vector<double> finite_diff_gradient(const TopologyGraph& g, std::span<const double> rbar,
                                                const UtilitySpec& utility, double h,
                                                const SolverOptions& opt = {}) {
  if (!(h > 0.0)) throw DomainError("finite_diff_gradient: step must be positive");
  std::vector<double> r(rbar.begin(), rbar.end());
  std::vector<double> grad(r.size(), 0.0);
  const double base = solve_p1(g, r, utility, opt).utility;
  for (std::size_t l = 0; l < r.size(); ++l) {
    const double orig = r[l];
    r[l] = orig + h;
    const double up = solve_p1(g, r, utility, opt).utility;
    if (orig >= h) {
      r[l] = orig - h;
      const double down = solve_p1(g, r, utility, opt).utility;
      grad[l] = (up - down) / (2.0 * h);
    } else {
      grad[l] = (up - base) / h;
    }
    r[l] = orig;
  }
  return grad;
}

enum class TimeSharingMethod { interior_point, frank_wolfe };

struct TimeSharingOptions {
  TimeSharingMethod method = TimeSharingMethod::interior_point;
  double gap_tolerance = 1e-5;  // Frank-Wolfe stopping gap
  int max_iterations = 500;     // Frank-Wolfe iterations
  SolverOptions inner;
};

// Conditional-gradient ascent of U~(R^T q) over the simplex, with gradient
// R lambda(q) from the fixed-capacity problem and an exact line search.
inline TimeSharingSolution frank_wolfe_time_sharing(const TopologyGraph& g,
                                                    const std::vector<std::vector<double>>& rows,
                                                    const UtilitySpec& utility, const TimeSharingOptions& opt,
                                                    std::vector<double>* objective_trace = nullptr) {
  const std::size_t J = rows.size();
  if (J == 0) throw DomainError("frank_wolfe_time_sharing: empty pattern set");
  const std::size_t L = g.num_links();
  auto mix = [&](const std::vector<double>& q) {
    std::vector<double> r(L, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t l = 0; l < L; ++l) r[l] += q[j] * rows[j][l];
    }
    return r;
  };
  auto value_at = [&](const std::vector<double>& r) { return solve_p1(g, r, utility, opt.inner).utility; };

  // Start from the best single row.
  std::vector<double> q(J, 0.0);
  std::size_t start = 0;
  double start_val = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < J; ++j) {
    const double v = value_at(rows[j]);
    if (v > start_val) {
      start_val = v;
      start = j;
    }
  }
  q[start] = 1.0;

  TimeSharingSolution out;
  for (int it = 0;; ++it) {
    std::vector<double> r = mix(q);
    FlowSolution fs = solve_p1(g, r, utility, opt.inner);
    if (objective_trace) objective_trace->push_back(fs.utility);
    std::vector<double> grad(J, 0.0);
    std::size_t best = 0;
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t l = 0; l < L; ++l) grad[j] += rows[j][l] * fs.lambda[l];
      if (grad[j] > grad[best]) best = j;
    }
    double avg = 0.0;
    for (std::size_t j = 0; j < J; ++j) avg += q[j] * grad[j];
    out.gap = grad[best] - avg;
    out.iterations = it;
    if (out.gap <= opt.gap_tolerance || it >= opt.max_iterations) {
      out.q = q;
      out.rbar = std::move(r);
      out.flow = std::move(fs);
      return out;
    }
    // At a kink the prices are only a supergradient, so the top vertex may
    // not ascend. Try the ascent vertices in order of their linear gain.
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < J; ++j) {
      if (grad[j] > avg) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return grad[i] > grad[j]; });
    double gamma = 0.0;
    for (std::size_t cand : order) {
      auto along = [&](double t) {
        std::vector<double> rr(L);
        for (std::size_t l = 0; l < L; ++l) rr[l] = (1.0 - t) * r[l] + t * rows[cand][l];
        return value_at(rr);
      };
      // Golden-section search of the concave 1-D restriction on [0, 1].
      constexpr double kInvPhi = 0.6180339887498949;
      double lo = 0.0, hi = 1.0;
      double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
      double f1 = along(x1), f2 = along(x2);
      while (hi - lo > 1e-10) {
        if (f1 < f2) {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + kInvPhi * (hi - lo);
          f2 = along(x2);
        } else {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - kInvPhi * (hi - lo);
          f1 = along(x1);
        }
      }
      double t = 0.5 * (lo + hi);
      double f_t = along(t);
      if (const double f_end = along(1.0); f_end > f_t) {
        t = 1.0;
        f_t = f_end;
      }
      if (f_t > fs.utility) {
        best = cand;
        gamma = t;
        break;
      }
    }
    if (gamma == 0.0) {
      out.q = q;
      out.rbar = std::move(r);
      out.flow = std::move(fs);
      return out;
    }
    for (std::size_t j = 0; j < J; ++j) q[j] *= (1.0 - gamma);
    q[best] += gamma;
  }
}

// Time-sharing over a fixed set of rate rows (|A| x L).
inline TimeSharingSolution optimize_time_sharing(const TopologyGraph& g, const std::vector<std::vector<double>>& rows,
                                                 const UtilitySpec& utility, const TimeSharingOptions& opt = {}) {
  if (rows.empty()) throw DomainError("optimize_time_sharing: empty pattern set");
  if (opt.method == TimeSharingMethod::frank_wolfe) return frank_wolfe_time_sharing(g, rows, utility, opt);
  return solve_flow_program(g, rows, utility, opt.inner);
}

// Feasibility of a flow solution against capacities: returns the largest
// violation of flow conservation, capacity and sign constraints.
inline double flow_infeasibility(const TopologyGraph& g, const FlowSolution& fs, std::span<const double> rbar) {
  double worst = 0.0;
  const Eigen::MatrixXi G = build_incidence(g);
  const Eigen::MatrixXd Gd = G.cast<double>();
  for (std::size_t k = 0; k < g.num_flows(); ++k) {
    worst = std::max(worst, -fs.d[k]);
    const Eigen::VectorXd xk = fs.x.row(static_cast<Eigen::Index>(k)).transpose();
    worst = std::max(worst, -xk.minCoeff());
    const Eigen::VectorXd diff = Gd * xk - flow_divergence(g, FlowId{k}, fs.d[k]);
    worst = std::max(worst, diff.lpNorm<Eigen::Infinity>());
  }
  for (std::size_t l = 0; l < g.num_links(); ++l) {
    const double load = fs.x.col(static_cast<Eigen::Index>(l)).sum();
    worst = std::max(worst, load - rbar[l]);
  }
  return worst;
}

}  // namespace hetrrm
