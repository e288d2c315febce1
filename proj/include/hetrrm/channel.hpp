#pragma once

// Two-timescale fading: a frozen large-scale power gain per link (path loss
// times lognormal shadowing) and i.i.d. unit-mean Rayleigh block fading per
// link, subband and subframe. Noise power is normalised to one, so
// |h|^2 * p is the SNR directly.

#include <cmath>
#include <cstdint>
#include <vector>

#include "hetrrm/ids.hpp"
#include "hetrrm/rng.hpp"
#include "hetrrm/topology.hpp"

namespace hetrrm {

enum class LinkClass { macro_macro, bs_bs, bs_mu };

struct PathLossClass {
  double exponent = 3.0;
  double reference_gain_db = 0.0;  // power gain at the reference distance
};

struct PathLossParams {
  PathLossClass macro_macro{2.0, 0.0};
  PathLossClass bs_bs{3.0, 0.0};
  PathLossClass bs_mu{3.5, 0.0};
  double shadowing_sigma_db = 0.0;
  double reference_distance_m = 1.0;

  const PathLossClass& of(LinkClass c) const {
    switch (c) {
      case LinkClass::macro_macro: return macro_macro;
      case LinkClass::bs_bs: return bs_bs;
      case LinkClass::bs_mu: return bs_mu;
    }
    return bs_mu;
  }
};

struct RadioParams {
  double p_macro_dbm = 40.0;
  double p_pico_dbm = 30.0;
};

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline LinkClass link_class(const TopologyGraph& g, LinkId l) {
  const Link& link = g.link(l);
  const NodeKind h = g.node(link.head).kind;
  const NodeKind t = g.node(link.tail).kind;
  if (t == NodeKind::mobile_user) return LinkClass::bs_mu;
  if (h == NodeKind::macro_bs && t == NodeKind::macro_bs) return LinkClass::macro_macro;
  return LinkClass::bs_bs;
}

// Large-scale power gain (h_large squared) of every link; wired links get 0.
inline std::vector<double> large_scale_gains(const TopologyGraph& g, const PathLossParams& p,
                                             std::uint64_t seed) {
  std::vector<double> out(g.num_links(), 0.0);
  for (std::size_t l = 0; l < g.num_links(); ++l) {
    const Link& link = g.links()[l];
    if (link.wired) continue;
    const double d = g.distance_m(link.head, link.tail);
    if (!(d > 0.0)) {
      throw DomainError("large_scale_gains: link " + std::to_string(l) + " has zero length");
    }
    const PathLossClass& c = p.of(link_class(g, LinkId{l}));
    double gain_db = c.reference_gain_db - 10.0 * c.exponent * std::log10(d / p.reference_distance_m);
    if (p.shadowing_sigma_db > 0.0) {
      gain_db += p.shadowing_sigma_db * rng::standard_normal(seed, rng::Stream::shadowing, l);
    }
    out[l] = db_to_linear(gain_db);
  }
  return out;
}

// log(1 + |h|^2 p) in nats.
inline double snr_term(double snr) { return std::log1p(snr); }

class ChannelModel {
 public:
  ChannelModel() = default;
  ChannelModel(const TopologyGraph& g, const PathLossParams& pathloss, const RadioParams& radio,
               std::size_t subbands, std::uint64_t seed, bool deterministic)
      : subbands_(subbands), seed_(seed), deterministic_(deterministic),
        gain_(large_scale_gains(g, pathloss, seed)), power_(g.num_links(), 0.0),
        wired_(g.num_links(), false) {
    const double pm = dbm_to_watt(radio.p_macro_dbm);
    const double pp = dbm_to_watt(radio.p_pico_dbm);
    for (std::size_t l = 0; l < g.num_links(); ++l) {
      const Link& link = g.links()[l];
      wired_[l] = link.wired;
      if (link.wired) continue;
      power_[l] = g.node(link.head).kind == NodeKind::macro_bs ? pm : pp;
    }
  }

  std::size_t subbands() const { return subbands_; }
  std::size_t num_links() const { return gain_.size(); }
  std::uint64_t seed() const { return seed_; }
  bool deterministic() const { return deterministic_; }
  bool wired(std::size_t l) const { return wired_[l]; }

  double large_scale_gain(std::size_t l) const { return gain_[l]; }
  double tx_power_w(std::size_t l) const { return power_[l]; }
  // Mean SNR, i.e. the SNR with |h_small|^2 replaced by its unit mean.
  double mean_snr(std::size_t l) const { return gain_[l] * power_[l]; }

  // |h_small|^2 for link l, subband m at counter t of `stream`.
  double small_scale_power(rng::Stream stream, std::uint64_t t, std::size_t l, std::size_t m) const {
    if (deterministic_) return 1.0;
    return rng::unit_exponential(seed_, stream, t, static_cast<std::uint32_t>(l),
                                 static_cast<std::uint32_t>(m));
  }

  double snr(rng::Stream stream, std::uint64_t t, std::size_t l, std::size_t m) const {
    return small_scale_power(stream, t, l, m) * gain_[l] * power_[l];
  }

  // Per-link, per-subband log(1 + SNR) for one subframe, laid out [l * M + m].
  std::vector<double> subframe_log_terms(rng::Stream stream, std::uint64_t t) const {
    std::vector<double> out(gain_.size() * subbands_, 0.0);
    for (std::size_t l = 0; l < gain_.size(); ++l) {
      if (wired_[l]) continue;
      for (std::size_t m = 0; m < subbands_; ++m) out[l * subbands_ + m] = snr_term(snr(stream, t, l, m));
    }
    return out;
  }

 private:
  std::size_t subbands_ = 1;
  std::uint64_t seed_ = 0;
  bool deterministic_ = false;
  std::vector<double> gain_;
  std::vector<double> power_;
  std::vector<bool> wired_;
};

}  // namespace hetrrm
