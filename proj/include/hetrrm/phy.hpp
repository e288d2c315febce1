#pragma once

// DTX patterns, per-subframe link scheduling and conditional link rates.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hetrrm/channel.hpp"
#include "hetrrm/ids.hpp"
#include "hetrrm/topology.hpp"

namespace hetrrm {

// Activity of every BS in one subframe; bit i is the BS with ordinal i
// (1 = transmit, 0 = DTX).
struct DtxPattern {
  std::uint64_t mask = 0;

  bool active(std::size_t bs_ordinal) const { return (mask >> bs_ordinal) & 1u; }
  int count() const { return std::popcount(mask); }
  auto operator<=>(const DtxPattern&) const = default;
};

inline std::string to_string(DtxPattern a, std::size_t num_bs) {
  std::string s(num_bs, '0');
  for (std::size_t i = 0; i < num_bs; ++i) {
    if (a.active(i)) s[i] = '1';
  }
  return s;
}

// Canonical order: lexicographic on the ascending list of active ordinals,
// so the all-silent pattern comes first and {0} < {0,2} < {1}.
inline bool canonical_less(DtxPattern a, DtxPattern b) {
  std::uint64_t x = a.mask;
  std::uint64_t y = b.mask;
  while (x != 0 && y != 0) {
    const int ix = std::countr_zero(x);
    const int iy = std::countr_zero(y);
    if (ix != iy) return ix < iy;
    x &= x - 1;
    y &= y - 1;
  }
  return x == 0 && y != 0;
}

inline bool is_feasible(const TopologyGraph& g, DtxPattern a) {
  const std::size_t nb = g.num_base_stations();
  if (nb < 64 && (a.mask >> nb) != 0) return false;
  for (std::size_t i = 0; i < nb; ++i) {
    if (!a.active(i)) continue;
    for (std::size_t j = i + 1; j < nb; ++j) {
      if (a.active(j) && g.conflicting(i, j)) return false;
    }
  }
  return true;
}

namespace detail {

// Bron-Kerbosch with pivoting over the complement of the conflict graph:
// maximal cliques there are maximal independent sets here.
inline void bron_kerbosch(const std::vector<std::uint64_t>& compatible, std::uint64_t r, std::uint64_t p,
                          std::uint64_t x, std::vector<DtxPattern>& out) {
  if (p == 0 && x == 0) {
    out.push_back(DtxPattern{r});
    return;
  }
  const std::uint64_t px = p | x;
  int pivot = std::countr_zero(px);
  int best = -1;
  for (std::uint64_t s = px; s != 0; s &= s - 1) {
    const int u = std::countr_zero(s);
    const int c = std::popcount(p & compatible[static_cast<std::size_t>(u)]);
    if (c > best) {
      best = c;
      pivot = u;
    }
  }
  for (std::uint64_t cand = p & ~compatible[static_cast<std::size_t>(pivot)]; cand != 0; cand &= cand - 1) {
    const int v = std::countr_zero(cand);
    const std::uint64_t bit = std::uint64_t{1} << v;
    bron_kerbosch(compatible, r | bit, p & compatible[static_cast<std::size_t>(v)],
                  x & compatible[static_cast<std::size_t>(v)], out);
    p &= ~bit;
    x |= bit;
  }
}

}  // namespace detail

// All maximal interference-free patterns plus the all-silent one, in
// canonical order. Fails when the BS count exceeds `max_base_stations`.
inline std::vector<DtxPattern> enumerate_feasible_patterns(const TopologyGraph& g,
                                                           std::size_t max_base_stations = 20) {
  const std::size_t nb = g.num_base_stations();
  if (nb > max_base_stations || nb > 63) {
    throw DomainError("enumerate_feasible_patterns: " + std::to_string(nb) +
                      " base stations exceed the enumeration cap of " + std::to_string(max_base_stations) +
                      "; restrict the scenario or raise the cap");
  }
  std::vector<std::uint64_t> compatible(nb, 0);
  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      if (i != j && !g.conflicting(i, j)) compatible[i] |= std::uint64_t{1} << j;
    }
  }
  std::vector<DtxPattern> out{DtxPattern{0}};
  if (nb > 0) {
    const std::uint64_t all = nb == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << nb) - 1;
    detail::bron_kerbosch(compatible, 0, all, 0, out);
  }
  std::sort(out.begin(), out.end(), canonical_less);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct DtxPolicy {
  std::vector<DtxPattern> patterns;
  std::vector<double> q;
};

// Simplex membership of a time-sharing vector.
inline bool on_simplex(std::span<const double> q, double tol = 1e-9) {
  if (q.empty()) return false;
  double sum = 0.0;
  for (double v : q) {
    if (!(v >= -tol && v <= 1.0 + tol)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol * static_cast<double>(q.size());
}

// Subband assignment for one subframe, rho[l * M + m].
struct LinkSchedule {
  std::size_t num_links = 0;
  std::size_t subbands = 0;
  std::vector<std::uint8_t> rho;

  bool operator()(std::size_t l, std::size_t m) const { return rho[l * subbands + m] != 0; }
};

// Number of (BS, subband) pairs breaking "at most a_n outgoing links per
// subband" (wired links excluded).
inline std::size_t schedule_violations(const TopologyGraph& g, DtxPattern a, const LinkSchedule& s) {
  std::size_t bad = 0;
  for (std::size_t o = 0; o < g.num_base_stations(); ++o) {
    const NodeId n = g.base_stations()[o];
    for (std::size_t m = 0; m < s.subbands; ++m) {
      int used = 0;
      for (LinkId l : g.outgoing_links(n)) used += s(l.value, m) ? 1 : 0;
      if (used > (a.active(o) ? 1 : 0)) ++bad;
    }
  }
  for (std::size_t l = 0; l < s.num_links; ++l) {
    if (!g.links()[l].wired) continue;
    for (std::size_t m = 0; m < s.subbands; ++m) bad += s(l, m) ? 1 : 0;
  }
  return bad;
}

enum class SchedulingRule {
  instantaneous,  // argmax on the current fading realisation
  large_scale,    // argmax on the mean SNR only, same link on every subband
};

// Weighted max-rate scheduling: every active BS gives each subband to the
// outgoing link with the largest omega_l * log(1 + |h_lm|^2 p_l); ties go to
// the lowest link index. `log_terms` is laid out [l * M + m].
inline LinkSchedule schedule_links(const TopologyGraph& g, DtxPattern a, std::span<const double> omega,
                                   std::span<const double> log_terms, std::size_t subbands) {
  LinkSchedule s{g.num_links(), subbands, std::vector<std::uint8_t>(g.num_links() * subbands, 0)};
  for (std::size_t o = 0; o < g.num_base_stations(); ++o) {
    if (!a.active(o)) continue;
    const auto out = g.outgoing_links(g.base_stations()[o]);
    for (std::size_t m = 0; m < subbands; ++m) {
      std::size_t best = SIZE_MAX;
      double best_val = 0.0;
      for (LinkId l : out) {
        if (g.links()[l.value].wired) continue;
        const double v = omega[l.value] * log_terms[l.value * subbands + m];
        if (best == SIZE_MAX || v > best_val) {
          best = l.value;
          best_val = v;
        }
      }
      if (best != SIZE_MAX) s.rho[best * subbands + m] = 1;
    }
  }
  return s;
}

// Log terms of a channel with |h_small|^2 replaced by its mean.
inline std::vector<double> mean_log_terms(const ChannelModel& ch) {
  const std::size_t M = ch.subbands();
  std::vector<double> out(ch.num_links() * M, 0.0);
  for (std::size_t l = 0; l < ch.num_links(); ++l) {
    if (ch.wired(l)) continue;
    for (std::size_t m = 0; m < M; ++m) out[l * M + m] = snr_term(ch.mean_snr(l));
  }
  return out;
}

// Per-link rate statistics with every BS transmitting, over a fixed set of
// channel samples.
struct ActiveRates {
  std::vector<double> mean;      // nats per subframe
  std::vector<double> variance;  // per-sample variance
  std::size_t samples = 0;

  double standard_error(std::size_t l) const {
    return samples > 1 ? std::sqrt(variance[l] / static_cast<double>(samples)) : 0.0;
  }
};

// Caches log(1 + SNR) for a window of channel samples so that conditional
// rates for many weight vectors and patterns can be evaluated cheaply. A
// BS's schedule depends only on its own links, so the rate of link l under
// pattern a is a_head(l) times its rate with every BS active.
class RateEstimator {
 public:
  RateEstimator() = default;
  RateEstimator(const TopologyGraph& g, const ChannelModel& ch, rng::Stream stream, std::uint64_t first_t,
                std::size_t samples)
      : graph_(&g), links_(g.num_links()), subbands_(ch.subbands()), samples_(ch.deterministic() ? 1 : samples),
        wired_capacity_(g.num_links(), 0.0), mean_terms_(mean_log_terms(ch)) {
    if (samples == 0) throw DomainError("RateEstimator: need at least one sample");
    terms_.reserve(samples_ * links_ * subbands_);
    for (std::size_t s = 0; s < samples_; ++s) {
      const auto t = ch.subframe_log_terms(stream, first_t + s);
      terms_.insert(terms_.end(), t.begin(), t.end());
    }
    for (std::size_t l = 0; l < links_; ++l) {
      if (g.links()[l].wired) wired_capacity_[l] = g.links()[l].wired_capacity;
    }
  }

  std::size_t samples() const { return samples_; }
  std::size_t subbands() const { return subbands_; }
  std::span<const double> sample_terms(std::size_t s) const {
    return {terms_.data() + s * links_ * subbands_, links_ * subbands_};
  }
  std::span<const double> mean_terms() const { return mean_terms_; }

  ActiveRates active_rates(std::span<const double> omega, SchedulingRule rule) const {
    const TopologyGraph& g = *graph_;
    ActiveRates r{std::vector<double>(links_, 0.0), std::vector<double>(links_, 0.0), samples_};
    std::vector<double> per_sample(links_, 0.0);
    const auto fixed = large_scale_choice(omega, rule);
    for (std::size_t s = 0; s < samples_; ++s) {
      sample_rates(s, omega, fixed, per_sample);
      // Welford update.
      const double n = static_cast<double>(s + 1);
      for (std::size_t l = 0; l < links_; ++l) {
        const double delta = per_sample[l] - r.mean[l];
        r.mean[l] += delta / n;
        r.variance[l] += delta * (per_sample[l] - r.mean[l]);
      }
    }
    for (std::size_t l = 0; l < links_; ++l) {
      r.variance[l] = samples_ > 1 ? r.variance[l] / static_cast<double>(samples_ - 1) : 0.0;
      if (g.links()[l].wired) {
        r.mean[l] = wired_capacity_[l];
        r.variance[l] = 0.0;
      }
    }
    return r;
  }

  // Per-sample omega-weighted radio rate of every BS with all BSs active,
  // laid out [s * num_bs + ordinal]. Wired links are left out since their
  // rate does not depend on the pattern.
  std::vector<double> weighted_bs_samples(std::span<const double> omega, SchedulingRule rule) const {
    const TopologyGraph& g = *graph_;
    const std::size_t nb = g.num_base_stations();
    std::vector<double> out(samples_ * nb, 0.0);
    std::vector<double> per_sample(links_, 0.0);
    const auto fixed = large_scale_choice(omega, rule);
    for (std::size_t s = 0; s < samples_; ++s) {
      sample_rates(s, omega, fixed, per_sample);
      for (std::size_t o = 0; o < nb; ++o) {
        double w = 0.0;
        for (LinkId l : g.outgoing_links(g.base_stations()[o])) {
          if (!g.links()[l.value].wired) w += omega[l.value] * per_sample[l.value];
        }
        out[s * nb + o] = w;
      }
    }
    return out;
  }

  // Conditional rate vector r(a, rho*(a, omega)).
  std::vector<double> conditional_rate(DtxPattern a, const ActiveRates& active) const {
    return mask_rates(*graph_, a, active.mean);
  }

  static std::vector<double> mask_rates(const TopologyGraph& g, DtxPattern a, std::span<const double> active) {
    std::vector<double> r(active.begin(), active.end());
    for (std::size_t l = 0; l < r.size(); ++l) {
      const Link& link = g.links()[l];
      if (link.wired) continue;
      if (!a.active(g.bs_ordinal(link.head))) r[l] = 0.0;
    }
    return r;
  }

 private:
  // Large-scale scheduling fixes one link per BS for every subband; empty
  // for the instantaneous rule.
  std::vector<std::size_t> large_scale_choice(std::span<const double> omega, SchedulingRule rule) const {
    const TopologyGraph& g = *graph_;
    std::vector<std::size_t> fixed;
    if (rule != SchedulingRule::large_scale) return fixed;
    fixed.assign(g.num_base_stations(), SIZE_MAX);
    for (std::size_t o = 0; o < g.num_base_stations(); ++o) {
      double best_val = 0.0;
      for (LinkId l : g.outgoing_links(g.base_stations()[o])) {
        if (g.links()[l.value].wired) continue;
        const double v = omega[l.value] * mean_terms_[l.value * subbands_];
        if (fixed[o] == SIZE_MAX || v > best_val) {
          fixed[o] = l.value;
          best_val = v;
        }
      }
    }
    return fixed;
  }

  void sample_rates(std::size_t s, std::span<const double> omega, const std::vector<std::size_t>& fixed,
                    std::vector<double>& out) const {
    const TopologyGraph& g = *graph_;
    std::fill(out.begin(), out.end(), 0.0);
    const double* terms = terms_.data() + s * links_ * subbands_;
    for (std::size_t o = 0; o < g.num_base_stations(); ++o) {
      const auto links = g.outgoing_links(g.base_stations()[o]);
      for (std::size_t m = 0; m < subbands_; ++m) {
        std::size_t best = fixed.empty() ? SIZE_MAX : fixed[o];
        if (fixed.empty()) {
          double best_val = 0.0;
          for (LinkId l : links) {
            if (g.links()[l.value].wired) continue;
            const double v = omega[l.value] * terms[l.value * subbands_ + m];
            if (best == SIZE_MAX || v > best_val) {
              best = l.value;
              best_val = v;
            }
          }
        }
        if (best != SIZE_MAX) out[best] += terms[best * subbands_ + m];
      }
    }
  }

  const TopologyGraph* graph_ = nullptr;
  std::size_t links_ = 0;
  std::size_t subbands_ = 1;
  std::size_t samples_ = 0;
  std::vector<double> wired_capacity_;
  std::vector<double> mean_terms_;
  std::vector<double> terms_;
};

// Monte Carlo estimate of the conditional rate of every link under pattern
// `a` with weight-driven scheduling, over subframes [first_t, first_t + n).
inline std::vector<double> conditional_rate(const TopologyGraph& g, const ChannelModel& ch, DtxPattern a,
                                            std::span<const double> omega, std::size_t n_samples,
                                            rng::Stream stream = rng::Stream::estimation_channel,
                                            std::uint64_t first_t = 0,
                                            SchedulingRule rule = SchedulingRule::instantaneous) {
  const RateEstimator est(g, ch, stream, first_t, n_samples);
  return est.conditional_rate(a, est.active_rates(omega, rule));
}

// Time-shared average rate: sum_j q_j r(a_j).
inline std::vector<double> policy_rate(std::span<const double> q, const std::vector<std::vector<double>>& rows) {
  if (q.size() != rows.size()) {
    throw DomainError("policy_rate: " + std::to_string(q.size()) + " time-sharing weights for " +
                      std::to_string(rows.size()) + " rate rows");
  }
  if (rows.empty()) return {};
  std::vector<double> out(rows.front().size(), 0.0);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j].size() != out.size()) throw DomainError("policy_rate: ragged rate table");
    for (std::size_t l = 0; l < out.size(); ++l) out[l] += q[j] * rows[j][l];
  }
  return out;
}

}  // namespace hetrrm
