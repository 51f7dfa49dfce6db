#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "channel.hpp"
#include "config.hpp"
#include "rng.hpp"

namespace subnetsim {

struct ResourceGrid {
  int subbands = 3;             // L
  int blocks_per_subband = 3;   // K
  double scs_hz = 480e3;
  int subcarriers_per_block = 12;

  static ResourceGrid from(const RadioConfig& r) {
    return {r.num_subbands, r.blocks_per_subband, r.scs_hz, r.subcarriers_per_block};
  }
  double block_bandwidth() const { return subcarriers_per_block * scs_hz; }
  double subband_bandwidth() const { return blocks_per_subband * block_bandwidth(); }
  int cells() const { return subbands * blocks_per_subband; }
};

inline double dbm_to_w(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double w_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

/// Thermal noise (-174 dBm/Hz + NF) over `bandwidth`, in W.
inline double noise_power(double bandwidth_hz, double noise_figure_db) {
  return dbm_to_w(-174.0 + noise_figure_db + 10.0 * std::log10(bandwidth_hz));
}

/// floor(2 B tau)
inline int channel_uses(double block_bandwidth_hz, double tau_s) {
  if (block_bandwidth_hz <= 0 || tau_s <= 0) return 0;
  return static_cast<int>(std::floor(2.0 * block_bandwidth_hz * tau_s + 1e-9));
}

/// Standard normal upper tail.
inline double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Finite-blocklength block error probability for `bits` over `pi` channel uses at SINR `gamma`.
inline double bler(int pi, double gamma, int bits) {
  if (pi < 1 || !(gamma > 0.0)) return 1.0;
  if (std::isinf(gamma)) return 0.0;
  const double log2e = std::numbers::log2e;
  const double dispersion = gamma * (gamma + 2.0) / (2.0 * (gamma + 1.0) * (gamma + 1.0)) * log2e * log2e;
  const double p = static_cast<double>(pi);
  const double num = 0.5 * p * std::log2(1.0 + gamma) - bits + 0.5 * std::log2(p);
  return q_function(num / std::sqrt(p * dispersion));
}

inline bool block_success(double epsilon, Engine& rng) { return uniform01(rng) < 1.0 - epsilon; }

/// ceil(payload / (active_subbands * K))
inline int bits_per_block(int payload_bits, int active_subbands, int blocks_per_subband) {
  const int blocks = active_subbands * blocks_per_subband;
  return (payload_bits + blocks - 1) / blocks;
}

/// Boolean sub-band selection vector of length L.
class SubbandMask {
 public:
  SubbandMask() = default;
  explicit SubbandMask(int size) : size_(size) {}
  static SubbandMask single(int size, int l) {
    SubbandMask m(size);
    m.set(l);
    return m;
  }
  static SubbandMask all(int size) {
    SubbandMask m(size);
    for (int l = 0; l < size; ++l) m.set(l);
    return m;
  }

  int size() const { return size_; }
  bool test(int l) const { return (bits_ >> l) & 1U; }
  void set(int l, bool on = true) {
    if (on)
      bits_ |= (1U << l);
    else
      bits_ &= ~(1U << l);
  }
  int count() const { return std::popcount(bits_); }
  bool operator==(const SubbandMask&) const = default;

 private:
  std::uint32_t bits_ = 0;
  int size_ = 0;
};

struct AllocationDecision {
  double power_total = 0.0;  // W
  SubbandMask subbands;
  bool transmit = true;

  bool active_on(int l) const { return transmit && subbands.test(l); }
  double power_per_block(int blocks_per_subband) const {
    const int n = subbands.count() * blocks_per_subband;
    return n == 0 ? 0.0 : power_total / n;
  }
};

struct PhyParams {
  ResourceGrid grid;
  double noise_block = 0.0;  // W per channel block
  int pi_ul = 0;
  int pi_dl = 0;
  int ul_bits = 0;
  int dl_bits = 0;
  double p_max = 1e-3;       // W

  static PhyParams from(const RadioConfig& r) {
    PhyParams p;
    p.grid = ResourceGrid::from(r);
    p.noise_block = noise_power(p.grid.block_bandwidth(), r.noise_figure_db);
    p.pi_ul = channel_uses(p.grid.block_bandwidth(), r.tau_ul);
    p.pi_dl = channel_uses(p.grid.block_bandwidth(), r.tau_dl);
    p.ul_bits = 8 * r.ul_bytes + r.metadata_bits;
    p.dl_bits = 8 * r.dl_bytes + r.metadata_bits;
    p.p_max = dbm_to_w(r.p_max_dbm);
    return p;
  }
};

/// Co-channel interference plus noise at receiver `rx` on block (k, l).
/// `active[n]` marks the transmitters of the current phase.
inline double interference_plus_noise(const ChannelState& ch, LinkDirection dir,
                                      std::span<const AllocationDecision> decisions,
                                      std::span<const std::uint8_t> active, std::size_t rx, int k, int l,
                                      double noise_block) {
  const int K = ch.blocks();
  double sum = noise_block;
  for (std::size_t tx = 0; tx < decisions.size(); ++tx) {
    if (tx == rx || !active[tx] || !decisions[tx].active_on(l)) continue;
    sum += decisions[tx].power_per_block(K) * ch.gain(dir, tx, rx, k, l);
  }
  return sum;
}

struct SinrReport {
  double desired = 0.0;
  double interference_noise = 0.0;
  double sinr = 0.0;
};

inline SinrReport compute_sinr(const ChannelState& ch, LinkDirection dir,
                               std::span<const AllocationDecision> decisions,
                               std::span<const std::uint8_t> active, std::size_t n, int k, int l,
                               double noise_block) {
  SinrReport r;
  r.desired = decisions[n].power_per_block(ch.blocks()) * ch.gain(dir, n, n, k, l);
  r.interference_noise = interference_plus_noise(ch, dir, decisions, active, n, k, l, noise_block);
  r.sinr = r.desired / r.interference_noise;
  return r;
}

/// Per-sub-band sum over blocks of interference plus noise, measured at AP `n`
/// on every sub-band whether selected or not.
struct RssiReport {
  std::vector<double> per_subband;
};

inline RssiReport measure_rssi(const ChannelState& ch, std::span<const AllocationDecision> decisions,
                               std::span<const std::uint8_t> active, std::size_t n, double noise_block) {
  RssiReport r;
  r.per_subband.assign(static_cast<std::size_t>(ch.subbands()), 0.0);
  for (int l = 0; l < ch.subbands(); ++l)
    for (int k = 0; k < ch.blocks(); ++k)
      r.per_subband[static_cast<std::size_t>(l)] +=
          interference_plus_noise(ch, LinkDirection::Uplink, decisions, active, n, k, l, noise_block);
  return r;
}

struct BlockOutcome {
  int k = 0;
  int l = 0;
  double sinr = 0.0;
  double epsilon = 1.0;
  bool success = false;
};

struct PacketOutcome {
  bool success = false;
  int bits_per_block = 0;
  std::vector<BlockOutcome> blocks;
};

/// Splits the payload evenly over the active blocks and succeeds only if every block does.
/// One uniform is drawn per block, in the given order.
inline PacketOutcome packet_success(int payload_bits, std::span<const BlockOutcome> active_blocks, int pi,
                                    int active_subbands, int blocks_per_subband, Engine& rng) {
  PacketOutcome out;
  out.bits_per_block = bits_per_block(payload_bits, active_subbands, blocks_per_subband);
  out.success = !active_blocks.empty();
  for (BlockOutcome b : active_blocks) {
    b.epsilon = bler(pi, b.sinr, out.bits_per_block);
    b.success = block_success(b.epsilon, rng);
    out.success = out.success && b.success;
    out.blocks.push_back(b);
  }
  return out;
}

struct LinkOutcome {
  bool ul_attempted = false;
  bool ul_ok = false;
  bool dl_attempted = false;
  bool dl_ok = false;
  bool loop_closed() const { return ul_ok && dl_ok; }
};

struct TddResult {
  std::vector<LinkOutcome> links;
  std::vector<RssiReport> rssi;  // UL-phase measurement at every AP
};

namespace detail {

inline void resolve_phase(const ChannelState& ch, LinkDirection dir, std::span<const AllocationDecision> decisions,
                          std::span<const std::uint8_t> active, int payload_bits, int pi, double noise_block,
                          Engine& rng, std::vector<std::uint8_t>& ok) {
  const int L = ch.subbands(), K = ch.blocks();
  std::vector<BlockOutcome> blocks;
  for (std::size_t n = 0; n < decisions.size(); ++n) {
    ok[n] = 0;
    if (!active[n]) continue;
    blocks.clear();
    for (int l = 0; l < L; ++l) {
      if (!decisions[n].subbands.test(l)) continue;
      for (int k = 0; k < K; ++k)
        blocks.push_back({k, l, compute_sinr(ch, dir, decisions, active, n, k, l, noise_block).sinr, 1.0, false});
    }
    ok[n] = packet_success(payload_bits, blocks, pi, decisions[n].subbands.count(), K, rng).success ? 1 : 0;
  }
}

}  // namespace detail

/// One TDD frame. UL: every due, transmitting subnetwork sends the sensor payload.
/// DL: only subnetworks whose UL succeeded send the control payload, reusing the UL
/// sub-bands and power. RSSI is measured at every AP during the UL phase.
inline TddResult tdd_round(const ChannelState& ch, const PhyParams& phy,
                           std::span<const AllocationDecision> decisions, std::span<const std::uint8_t> due,
                           Engine& bler_rng, bool measure = true) {
  const std::size_t n = decisions.size();
  TddResult res;
  res.links.resize(n);
  std::vector<std::uint8_t> ul_active(n), ul_ok(n), dl_ok(n);
  for (std::size_t i = 0; i < n; ++i) ul_active[i] = due[i] && decisions[i].transmit ? 1 : 0;
  detail::resolve_phase(ch, LinkDirection::Uplink, decisions, ul_active, phy.ul_bits, phy.pi_ul, phy.noise_block,
                        bler_rng, ul_ok);
  if (measure) {
    res.rssi.reserve(n);
    for (std::size_t i = 0; i < n; ++i) res.rssi.push_back(measure_rssi(ch, decisions, ul_active, i, phy.noise_block));
  }
  detail::resolve_phase(ch, LinkDirection::Downlink, decisions, ul_ok, phy.dl_bits, phy.pi_dl, phy.noise_block,
                        bler_rng, dl_ok);
  for (std::size_t i = 0; i < n; ++i) {
    res.links[i].ul_attempted = ul_active[i] != 0;
    res.links[i].ul_ok = ul_ok[i] != 0;
    res.links[i].dl_attempted = ul_ok[i] != 0;
    res.links[i].dl_ok = dl_ok[i] != 0;
  }
  return res;
}

}  // namespace subnetsim
