#pragma once

// Two-timescale iterative RRM. Every superframe simulates its subframes under
// the current time-shared DTX policy, then finds a new pattern for the
// current link weights (Procedure I), re-optimises the time sharing together
// with flows and routes (Procedure II) and feeds the resulting link prices
// back as scheduling weights.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hetrrm/channel.hpp"
#include "hetrrm/netopt.hpp"
#include "hetrrm/phy.hpp"
#include "hetrrm/rng.hpp"
#include "hetrrm/topology.hpp"
#include "hetrrm/utility.hpp"

namespace hetrrm {

// Which channel samples Procedure I averages over: one fixed window shared
// by every superframe, or a fresh window per superframe.
enum class EstimationWindow { common, superframe };

// adaptive: Procedures I and II; uniform: fixed equal time sharing over the
// non-empty feasible patterns.
enum class PolicyKind { adaptive, uniform };

struct RrmConfig {
  std::size_t superframe_length = 200;  // T_s subframes
  std::size_t guard_subframes = 10;     // T_d
  std::size_t estimation_samples = 0;   // 0 means superframe_length
  EstimationWindow window = EstimationWindow::common;
  double epsilon = 1e-6;  // stop once |U(i) - U(i-1)| < epsilon
  // When set, stopping also needs the first-order certificate to be at most
  // certificate_tolerance * omega^T rbar (adaptive policy only).
  bool require_certificate = true;
  double certificate_tolerance = 1e-4;
  // Re-offer every retained pattern under the new weights each superframe.
  bool refresh_patterns = true;
  // Also add every pattern whose weighted rate beats omega^T rbar, not only
  // the best one.
  bool improving_patterns = true;
  // Uniform policy only: schedule with the running average of the
  // max-normalised prices instead of the latest prices.
  bool average_weights = true;
  int max_iterations = 50;
  SchedulingRule rule = SchedulingRule::instantaneous;
  PolicyKind policy = PolicyKind::adaptive;
  std::optional<DtxPattern> initial_pattern;
  double prune_threshold = 1e-9;  // columns with smaller q are dropped before augmenting
  bool simulate_subframes = true;
  std::size_t max_base_stations = 20;
  UtilitySpec utility;
  TimeSharingOptions time_sharing;

  std::size_t samples() const { return estimation_samples ? estimation_samples : superframe_length; }
};

// One time-sharing candidate: a DTX pattern together with the weights its
// link schedule was derived from and the conditional rates that schedule
// achieves.
struct Column {
  DtxPattern pattern;
  std::vector<double> omega;
  std::vector<double> rates;  // nats per subframe
  std::vector<double> se;     // standard error of each rate
};

struct RrmState {
  int i = 0;
  std::vector<Column> columns;
  std::vector<double> q;
  std::vector<double> omega;
  std::vector<double> rbar;
  FlowSolution flow;
  double utility = 0.0;
  double tol_mc = 0.0;  // 3 standard errors of U from rate estimation
};

// Step 1 bookkeeping: what the simulated subframes of one superframe did.
struct SubframeAudit {
  std::vector<double> empirical_rates;
  std::vector<std::size_t> column_counts;
  std::size_t schedule_violations = 0;
  std::uint64_t decision_subframe = 0;
};

struct IterationRecord {
  int i = 0;
  double utility = 0.0;
  std::vector<DtxPattern> patterns;
  std::vector<double> q;
  std::vector<double> d;
  std::vector<double> rbar;
  std::vector<double> empirical;
  double tol_mc = 0.0;
  std::uint64_t decision_subframe = 0;
  std::size_t schedule_violations = 0;
  double flow_infeasibility = 0.0;
  bool simplex_ok = true;
};

struct ProcedureOneResult {
  std::size_t best = 0;                      // index into the feasible patterns
  std::vector<double> weighted;              // omega^T r(a, rho*(a, omega)) per pattern
  std::vector<std::vector<double>> rows;     // r(a, rho*(a, omega)) per pattern
  ActiveRates active;
};

struct CertificateCheck {
  double worst_difference = 0.0;  // min over a of omega^T (r(a*) - r(a))
  double tolerance = 0.0;         // allowance at the worst pattern
  bool ok = true;
  std::size_t best = 0;
};

struct RrmResult {
  RrmState state;
  std::vector<IterationRecord> records;
  bool converged = false;
  int iterations = 0;
  double gap = 0.0;
};

// Procedure I: evaluates omega^T r(a, rho*(a, omega)) for every feasible
// pattern on the estimator's samples and returns the maximiser (ties go to
// the canonically first pattern).
inline ProcedureOneResult procedure_one(const TopologyGraph& g, std::span<const DtxPattern> patterns,
                                        const RateEstimator& est, std::span<const double> omega,
                                        SchedulingRule rule) {
  if (patterns.empty()) throw DomainError("procedure_one: empty pattern set");
  ProcedureOneResult out;
  out.active = est.active_rates(omega, rule);
  out.weighted.reserve(patterns.size());
  for (std::size_t j = 0; j < patterns.size(); ++j) {
    out.rows.push_back(RateEstimator::mask_rates(g, patterns[j], out.active.mean));
    double w = 0.0;
    for (std::size_t l = 0; l < omega.size(); ++l) w += omega[l] * out.rows.back()[l];
    out.weighted.push_back(w);
    if (w > out.weighted[out.best]) out.best = j;
  }
  return out;
}

class RrmEngine {
 public:
  RrmEngine(const TopologyGraph& g, const ChannelModel& ch, RrmConfig cfg)
      : g_(&g), ch_(&ch), cfg_(std::move(cfg)),
        patterns_(enumerate_feasible_patterns(g, cfg_.max_base_stations)),
        common_(g, ch, rng::Stream::estimation_channel, 0, cfg_.samples()) {
    cfg_.utility.check();
    if (!(cfg_.epsilon > 0.0)) throw DomainError("rrm: epsilon must be positive");
    if (cfg_.max_iterations < 1) throw DomainError("rrm: max_iterations must be at least 1");
    if (cfg_.superframe_length == 0) throw DomainError("rrm: superframe length must be positive");
    if (cfg_.guard_subframes >= cfg_.superframe_length) {
      throw DomainError("rrm: guard interval must be shorter than the superframe");
    }
    if (g.num_base_stations() == 0) throw DomainError("rrm: topology has no base stations");
  }

  const RrmConfig& config() const { return cfg_; }
  const std::vector<DtxPattern>& patterns() const { return patterns_; }
  const TopologyGraph& graph() const { return *g_; }
  const ChannelModel& channel() const { return *ch_; }

  DtxPattern default_initial_pattern() const {
    const std::size_t nb = g_->num_base_stations();
    const DtxPattern all{nb == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << nb) - 1};
    if (is_feasible(*g_, all)) return all;
    return patterns_.size() > 1 ? patterns_[1] : patterns_[0];
  }

  // Samples Procedure I uses in superframe i.
  RateEstimator estimator(int i) const {
    if (cfg_.window == EstimationWindow::common) return common_;
    const std::uint64_t first = static_cast<std::uint64_t>(i) * cfg_.samples();
    return RateEstimator(*g_, *ch_, rng::Stream::estimation_channel, first, cfg_.samples());
  }

  RrmState initial_state() const {
    RrmState s;
    s.omega.assign(g_->num_links(), 1.0);
    const RateEstimator est = estimator(0);
    const ActiveRates active = est.active_rates(s.omega, cfg_.rule);
    if (cfg_.policy == PolicyKind::uniform) {
      s.columns = uniform_columns(active, s.omega);
    } else {
      const DtxPattern a1 = cfg_.initial_pattern.value_or(default_initial_pattern());
      if (!is_feasible(*g_, a1)) throw DomainError("rrm: initial pattern is not interference-free");
      s.columns.push_back(make_column(a1, s.omega, active));
    }
    s.q.assign(s.columns.size(), 1.0 / static_cast<double>(s.columns.size()));
    solve_flows(s, /*optimise_q=*/cfg_.policy == PolicyKind::adaptive);
    s.omega.assign(g_->num_links(), 1.0);
    return s;
  }

  // Step 1: the T_s subframes of superframe i under the policy in `s`.
  SubframeAudit simulate_subframes(const RrmState& s, int i) const {
    const std::size_t L = g_->num_links();
    const std::size_t M = ch_->subbands();
    const std::size_t T = cfg_.superframe_length;
    SubframeAudit audit;
    audit.empirical_rates.assign(L, 0.0);
    audit.column_counts.assign(s.columns.size(), 0);
    audit.decision_subframe = static_cast<std::uint64_t>(i) * T - cfg_.guard_subframes;
    const auto mean_terms = mean_log_terms(*ch_);
    std::vector<double> cdf(s.q.size());
    std::partial_sum(s.q.begin(), s.q.end(), cdf.begin());
    for (std::size_t t = 0; t < T; ++t) {
      const std::uint64_t tau = static_cast<std::uint64_t>(i - 1) * T + t;
      const double u = rng::uniform(ch_->seed(), rng::Stream::pattern_choice, static_cast<std::uint64_t>(i),
                                    static_cast<std::uint32_t>(t)) * cdf.back();
      std::size_t j = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      j = std::min(j, s.columns.size() - 1);
      ++audit.column_counts[j];
      const Column& c = s.columns[j];
      const auto terms = ch_->subframe_log_terms(rng::Stream::subframe_channel, tau);
      const auto& choice = cfg_.rule == SchedulingRule::large_scale ? mean_terms : terms;
      const LinkSchedule sched = schedule_links(*g_, c.pattern, c.omega, choice, M);
      audit.schedule_violations += schedule_violations(*g_, c.pattern, sched);
      for (std::size_t l = 0; l < L; ++l) {
        if (g_->links()[l].wired) {
          audit.empirical_rates[l] += g_->links()[l].wired_capacity;
          continue;
        }
        for (std::size_t m = 0; m < M; ++m) {
          if (sched(l, m)) audit.empirical_rates[l] += terms[l * M + m];
        }
      }
    }
    for (double& r : audit.empirical_rates) r /= static_cast<double>(T);
    return audit;
  }

  // Steps 1 to 2c of one superframe.
  RrmState run_superframe(const RrmState& s, SubframeAudit* audit = nullptr) const {
    RrmState n;
    n.i = s.i + 1;
    if (audit && cfg_.simulate_subframes) *audit = simulate_subframes(s, n.i);
    const RateEstimator est = estimator(n.i);
    if (cfg_.policy == PolicyKind::uniform) {
      n.columns = uniform_columns(est.active_rates(s.omega, cfg_.rule), s.omega);
      n.q.assign(n.columns.size(), 1.0 / static_cast<double>(n.columns.size()));
      solve_flows(n, false);
      if (cfg_.average_weights) {
        const double top = *std::max_element(n.omega.begin(), n.omega.end());
        const double w = 1.0 / static_cast<double>(n.i + 1);
        for (std::size_t l = 0; l < n.omega.size(); ++l) {
          const double price = top > 0.0 ? n.omega[l] / top : 0.0;
          n.omega[l] = (1.0 - w) * s.omega[l] + w * price;
        }
      }
      return n;
    }
    const ProcedureOneResult p1 = procedure_one(*g_, patterns_, est, s.omega, cfg_.rule);
    Column fresh = make_column(patterns_[p1.best], s.omega, p1.active);
    for (std::size_t j = 0; j < s.columns.size(); ++j) {
      if (s.q[j] > cfg_.prune_threshold) {
        n.columns.push_back(s.columns[j]);
        n.q.push_back(s.q[j]);
      }
    }
    auto add = [&](Column c) {
      const bool duplicate = std::any_of(n.columns.begin(), n.columns.end(), [&](const Column& o) {
        return o.pattern == c.pattern && o.rates == c.rates;
      });
      if (duplicate) return;
      n.columns.push_back(std::move(c));
      n.q.push_back(0.0);
    };
    // Retained patterns are also offered under the current weights, as the
    // scheduler would now run them; their old rows stay so the previous
    // policy remains feasible.
    if (cfg_.refresh_patterns) {
      const std::size_t retained = n.columns.size();
      for (std::size_t j = 0; j < retained; ++j) add(make_column(n.columns[j].pattern, s.omega, p1.active));
    }
    add(std::move(fresh));
    if (cfg_.improving_patterns) {
      double current = 0.0;
      for (std::size_t l = 0; l < s.rbar.size(); ++l) current += s.omega[l] * s.rbar[l];
      const double margin = 1e-12 * std::max(1.0, std::abs(current));
      for (std::size_t j = 0; j < patterns_.size(); ++j) {
        if (j != p1.best && p1.weighted[j] > current + margin) add(make_column(patterns_[j], s.omega, p1.active));
      }
    }
    solve_flows(n, true);
    return n;
  }

  RrmResult run_to_convergence(const std::function<void(const IterationRecord&)>& observer = {}) const {
    RrmResult res;
    RrmState state = initial_state();
    auto emit = [&](const RrmState& s, const SubframeAudit* audit) {
      res.records.push_back(record(s, audit));
      if (observer) observer(res.records.back());
    };
    emit(state, nullptr);
    RrmState best = state;
    for (int it = 1; it <= cfg_.max_iterations; ++it) {
      SubframeAudit audit;
      RrmState next = run_superframe(state, &audit);
      emit(next, cfg_.simulate_subframes ? &audit : nullptr);
      const double delta = std::abs(next.utility - state.utility);
      if (next.utility >= best.utility) best = next;
      state = std::move(next);
      res.iterations = it;
      // The first superframe runs on the all-ones initial weights, so the
      // stopping rule applies from the second one on.
      if (it >= 2 && delta < cfg_.epsilon && certified(state)) {
        res.converged = true;
        break;
      }
    }
    res.state = res.converged ? std::move(state) : std::move(best);
    res.gap = optimality_gap_certificate(res.state);
    return res;
  }

  // max_a omega^T r(a, rho*(a, omega)) - omega^T rbar, with omega the prices
  // of the state. Zero at a first-order optimum.
  double optimality_gap_certificate(const RrmState& s) const {
    const ProcedureOneResult p1 = procedure_one(*g_, patterns_, estimator(s.i + 1), s.omega, cfg_.rule);
    double current = 0.0;
    for (std::size_t l = 0; l < s.rbar.size(); ++l) current += s.omega[l] * s.rbar[l];
    return p1.weighted[p1.best] - current;
  }

  // Checks that Procedure I's output beats every feasible pattern in
  // omega-weighted rate on an independent sample set, within 3 standard
  // errors of the paired difference.
  CertificateCheck procedure_one_check(std::span<const double> omega) const {
    const ProcedureOneResult p1 = procedure_one(*g_, patterns_, common_, omega, cfg_.rule);
    const RateEstimator val(*g_, *ch_, rng::Stream::validation_channel, 0, cfg_.samples());
    const std::size_t nb = g_->num_base_stations();
    const std::size_t S = val.samples();
    const auto w = val.weighted_bs_samples(omega, cfg_.rule);
    const DtxPattern star = patterns_[p1.best];
    CertificateCheck out;
    out.best = p1.best;
    double scale = 0.0;
    for (double v : w) scale = std::max(scale, std::abs(v));
    bool first = true;
    for (const DtxPattern& a : patterns_) {
      double mean = 0.0, m2 = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        double diff = 0.0;
        for (std::size_t o = 0; o < nb; ++o) {
          diff += (static_cast<double>(star.active(o)) - static_cast<double>(a.active(o))) * w[s * nb + o];
        }
        const double delta = diff - mean;
        mean += delta / static_cast<double>(s + 1);
        m2 += delta * (diff - mean);
      }
      const double se = S > 1 ? std::sqrt(m2 / static_cast<double>(S - 1) / static_cast<double>(S)) : 0.0;
      const double tol = ch_->deterministic() ? 1e-9 * std::max(1.0, scale) : 3.0 * se;
      if (first || mean + tol < out.worst_difference + out.tolerance) {
        out.worst_difference = mean;
        out.tolerance = tol;
        first = false;
      }
    }
    out.ok = out.worst_difference >= -out.tolerance;
    return out;
  }

  IterationRecord record(const RrmState& s, const SubframeAudit* audit) const {
    IterationRecord r;
    r.i = s.i;
    r.utility = s.utility;
    for (const Column& c : s.columns) r.patterns.push_back(c.pattern);
    r.q = s.q;
    r.d = s.flow.d;
    r.rbar = s.rbar;
    r.tol_mc = s.tol_mc;
    if (audit) {
      r.empirical = audit->empirical_rates;
      r.decision_subframe = audit->decision_subframe;
      r.schedule_violations = audit->schedule_violations;
    }
    r.flow_infeasibility = flow_infeasibility(*g_, s.flow, s.rbar);
    r.simplex_ok = on_simplex(s.q, 1e-9);
    return r;
  }

 private:
  bool certified(const RrmState& s) const {
    if (!cfg_.require_certificate || cfg_.policy != PolicyKind::adaptive) return true;
    double scale = 0.0;
    for (std::size_t l = 0; l < s.rbar.size(); ++l) scale += s.omega[l] * s.rbar[l];
    return optimality_gap_certificate(s) <= cfg_.certificate_tolerance * scale + 1e-12;
  }

  Column make_column(DtxPattern a, std::span<const double> omega, const ActiveRates& active) const {
    Column c{a, std::vector<double>(omega.begin(), omega.end()), RateEstimator::mask_rates(*g_, a, active.mean),
             std::vector<double>(active.mean.size(), 0.0)};
    for (std::size_t l = 0; l < c.se.size(); ++l) c.se[l] = c.rates[l] > 0.0 ? active.standard_error(l) : 0.0;
    return c;
  }

  std::vector<Column> uniform_columns(const ActiveRates& active, std::span<const double> omega) const {
    std::vector<Column> cols;
    for (const DtxPattern& a : patterns_) {
      if (a.mask != 0) cols.push_back(make_column(a, omega, active));
    }
    if (cols.empty()) cols.push_back(make_column(patterns_.front(), omega, active));
    return cols;
  }

  // Fills q (when optimising), rbar, flows, prices and the noise allowance.
  void solve_flows(RrmState& s, bool optimise_q) const {
    std::vector<std::vector<double>> rows;
    rows.reserve(s.columns.size());
    for (const Column& c : s.columns) rows.push_back(c.rates);
    if (optimise_q) {
      TimeSharingSolution ts = optimize_time_sharing(*g_, rows, cfg_.utility, cfg_.time_sharing);
      s.q = std::move(ts.q);
      s.rbar = std::move(ts.rbar);
      s.flow = std::move(ts.flow);
    } else {
      s.rbar = policy_rate(s.q, rows);
      s.flow = solve_p1(*g_, s.rbar, cfg_.utility, cfg_.time_sharing.inner);
    }
    s.utility = s.flow.utility;
    s.omega = s.flow.lambda;
    double var = 0.0;
    for (std::size_t l = 0; l < s.rbar.size(); ++l) {
      double v = 0.0;
      for (std::size_t j = 0; j < s.columns.size(); ++j) {
        v += s.q[j] * s.q[j] * s.columns[j].se[l] * s.columns[j].se[l];
      }
      var += s.omega[l] * s.omega[l] * v;
    }
    s.tol_mc = 3.0 * std::sqrt(var);
  }

  const TopologyGraph* g_;
  const ChannelModel* ch_;
  RrmConfig cfg_;
  std::vector<DtxPattern> patterns_;
  RateEstimator common_;
};

}  // namespace hetrrm
