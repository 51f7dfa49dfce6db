#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "channel.hpp"
#include "phy.hpp"
#include "rng.hpp"

namespace subnetsim {

/// Radio-sensing operations and signalling messages spent by a coordination scheme.
struct ExecutionCost {
  long sensing = 0;
  long messages = 0;
  friend bool operator==(const ExecutionCost&, const ExecutionCost&) = default;
};

/// Per-sub-band N x N gains; entry (tx, rx) sums the UL gain from tx's sensor to rx's AP
/// over the sub-band's K blocks. The diagonal holds the desired links.
class CrossGainMatrix {
 public:
  CrossGainMatrix() = default;
  CrossGainMatrix(int subbands, std::size_t n) : n_(n), g_(static_cast<std::size_t>(subbands) * n * n, 0.0) {}

  std::size_t size() const { return n_; }
  int subbands() const { return n_ == 0 ? 0 : static_cast<int>(g_.size() / (n_ * n_)); }
  double& operator()(int l, std::size_t tx, std::size_t rx) { return g_[(static_cast<std::size_t>(l) * n_ + tx) * n_ + rx]; }
  double operator()(int l, std::size_t tx, std::size_t rx) const {
    return g_[(static_cast<std::size_t>(l) * n_ + tx) * n_ + rx];
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> g_;
};

/// Snapshot of the UL cross gains. Every receiver senses each of the other N - 1
/// interfering links on each sub-band; those reads are charged to `sensing[rx]`.
inline CrossGainMatrix measure_cross_gains(const ChannelState& ch, std::vector<long>* sensing = nullptr) {
  const std::size_t n = ch.size();
  CrossGainMatrix g(ch.subbands(), n);
  for (int l = 0; l < ch.subbands(); ++l)
    for (std::size_t tx = 0; tx < n; ++tx)
      for (std::size_t rx = 0; rx < n; ++rx) {
        double sum = 0.0;
        for (int k = 0; k < ch.blocks(); ++k) sum += ch.gain(LinkDirection::Uplink, tx, rx, k, l);
        g(l, tx, rx) = sum;
        if (sensing && tx != rx) ++(*sensing)[rx];
      }
  return g;
}

inline AllocationDecision random_decision(int subbands, double p_max, Engine& rng) {
  return {p_max, SubbandMask::single(subbands, static_cast<int>(uniform_index(rng, static_cast<std::size_t>(subbands)))),
          true};
}

inline AllocationDecision fp_decision(int subbands, double p_max) { return {p_max, SubbandMask::all(subbands), true}; }

/// Sequential greedy sub-band selection in the given order. Each subnetwork senses the
/// per-sub-band aggregate of reference signals (at `ref_power` split over K blocks) from the
/// subnetworks already assigned, plus noise, and picks the minimum (ties to the lower index).
inline std::vector<int> seq_greedy(const CrossGainMatrix& g, std::span<const std::size_t> order, double ref_power,
                                   int blocks_per_subband, double noise_block) {
  const std::size_t n = g.size();
  const int L = g.subbands();
  std::vector<int> assignment(n, -1);
  std::vector<double> sensed(static_cast<std::size_t>(L));
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t me = order[pos];
    for (int l = 0; l < L; ++l) {
      double s = blocks_per_subband * noise_block;
      for (std::size_t prev = 0; prev < pos; ++prev) {
        const std::size_t other = order[prev];
        if (assignment[other] == l) s += ref_power / blocks_per_subband * g(l, other, me);
      }
      sensed[static_cast<std::size_t>(l)] = s;
    }
    int best = 0;
    for (int l = 1; l < L; ++l)
      if (sensed[static_cast<std::size_t>(l)] < sensed[static_cast<std::size_t>(best)]) best = l;
    assignment[me] = best;
  }
  return assignment;
}

/// Sum over receivers of interference-to-signal ratios from co-channel transmitters.
inline double sisa_objective(const CrossGainMatrix& g, std::span<const int> assignment) {
  double total = 0.0;
  for (std::size_t rx = 0; rx < assignment.size(); ++rx)
    for (std::size_t tx = 0; tx < assignment.size(); ++tx)
      if (tx != rx && assignment[tx] == assignment[rx]) {
        const int l = assignment[rx];
        total += g(l, tx, rx) / g(l, rx, rx);
      }
  return total;
}

struct SisaResult {
  std::vector<int> assignment;
  std::vector<double> objective_per_sweep;  // after each completed sweep
  int sweeps = 0;
};

/// Coordinate descent on the global ISR sum: subnetworks are visited in index order and
/// moved to the sub-band that minimises the global objective with all others held fixed.
/// A move requires a strict decrease. Stops after `max_sweeps` or a sweep without change.
inline SisaResult sisa(const CrossGainMatrix& g, std::vector<int> assignment, int max_sweeps = 10) {
  const std::size_t n = g.size();
  const int L = g.subbands();
  // Objective terms that involve subnetwork `me` when it operates on sub-band l.
  auto involvement = [&](std::size_t me, int l) {
    double s = 0.0;
    for (std::size_t other = 0; other < n; ++other) {
      if (other == me || assignment[other] != l) continue;
      s += g(l, other, me) / g(l, me, me) + g(l, me, other) / g(l, other, other);
    }
    return s;
  };
  SisaResult res;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool changed = false;
    for (std::size_t me = 0; me < n; ++me) {
      int best = assignment[me];
      double best_value = involvement(me, best);
      for (int l = 0; l < L; ++l) {
        if (l == assignment[me]) continue;
        const double v = involvement(me, l);
        if (v < best_value) {
          best_value = v;
          best = l;
        }
      }
      if (best != assignment[me]) {
        assignment[me] = best;
        changed = true;
      }
    }
    ++res.sweeps;
    res.objective_per_sweep.push_back(sisa_objective(g, assignment));
    if (!changed) break;
  }
  res.assignment = std::move(assignment);
  return res;
}

struct PowerControlResult {
  std::vector<double> power;  // W, one per subnetwork
  int iterations = 0;
  bool improved = false;
};

namespace detail {

// sum_n log(log2(1 + gamma_n)) for one co-channel group; per-block power p/K against
// per-block mean gain G/K.
inline double pc_objective(const CrossGainMatrix& g, int l, std::span<const std::size_t> group,
                           std::span<const double> p, int K, double noise_block, std::vector<double>* grad = nullptr) {
  const std::size_t m = group.size();
  const double scale = 1.0 / (static_cast<double>(K) * K);
  double f = 0.0;
  if (grad) grad->assign(m, 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    const std::size_t rx = group[a];
    double interference = noise_block;
    for (std::size_t b = 0; b < m; ++b)
      if (b != a) interference += p[b] * g(l, group[b], rx) * scale;
    const double gamma = p[a] * g(l, rx, rx) * scale / interference;
    const double rate = std::log2(1.0 + gamma);
    f += std::log(rate);
    if (grad) {
      // d/ds of log(rate) with s = log p
      const double d_gamma = 1.0 / (rate * (1.0 + gamma) * std::numbers::ln2);
      (*grad)[a] += d_gamma * gamma;
      for (std::size_t b = 0; b < m; ++b)
        if (b != a) (*grad)[b] -= d_gamma * gamma * p[b] * g(l, group[b], rx) * scale / interference;
    }
  }
  return f;
}

}  // namespace detail

inline double pc_group_objective(const CrossGainMatrix& g, int l, std::span<const std::size_t> group,
                                 std::span<const double> p, int K, double noise_block) {
  return detail::pc_objective(g, l, group, p, K, noise_block);
}

/// Proportional-fair power control per co-channel group: maximise sum log(rate) over
/// 0 < p <= p_max by projected gradient ascent in log-power with backtracking, from p_max.
inline PowerControlResult sisa_pc(const CrossGainMatrix& g, std::span<const int> assignment, double p_max,
                                  int blocks_per_subband, double noise_block, int max_iterations = 500) {
  const std::size_t n = assignment.size();
  PowerControlResult res;
  res.power.assign(n, p_max);
  const double s_max = std::log(p_max);
  const double s_min = s_max - 30.0;
  for (int l = 0; l < g.subbands(); ++l) {
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < n; ++i)
      if (assignment[i] == l) group.push_back(i);
    if (group.size() < 2) continue;
    const std::size_t m = group.size();
    std::vector<double> s(m, s_max), p(m, p_max), grad, trial_s(m), trial_p(m), grad_unused;
    double f = detail::pc_objective(g, l, group, p, blocks_per_subband, noise_block, &grad);
    const double f_start = f;
    double step = 1.0;
    for (int it = 0; it < max_iterations; ++it) {
      ++res.iterations;
      bool accepted = false;
      for (int bt = 0; bt < 40 && !accepted; ++bt) {
        double moved = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
          trial_s[a] = std::clamp(s[a] + step * grad[a], s_min, s_max);
          trial_p[a] = std::min(p_max, std::exp(trial_s[a]));
          moved += (trial_s[a] - s[a]) * grad[a];
        }
        if (moved <= 0.0) break;
        const double f_trial = detail::pc_objective(g, l, group, trial_p, blocks_per_subband, noise_block);
        if (f_trial >= f + 1e-4 * moved) {
          s = trial_s;
          p = trial_p;
          f = detail::pc_objective(g, l, group, p, blocks_per_subband, noise_block, &grad);
          accepted = true;
          step *= 2.0;
        } else {
          step *= 0.5;
        }
      }
      if (!accepted) break;
    }
    if (f > f_start) {
      res.improved = true;
      for (std::size_t a = 0; a < m; ++a) res.power[group[a]] = p[a];
    }
  }
  return res;
}

/// Closed-form per-round execution costs: sensing per subnetwork and total messages.
inline ExecutionCost count_execution_costs(const std::string& policy, int n, int subbands) {
  if (policy == "cadic" || policy == "cadic_modified") return {subbands, 0};
  if (policy == "sisa" || policy == "sisa_pc")
    return {static_cast<long>(subbands) * (n - 1), static_cast<long>(subbands) * n * n + n};
  if (policy == "seq_greedy") return {subbands, n};
  return {0, 0};
}

}  // namespace subnetsim
