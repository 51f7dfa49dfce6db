#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "phy.hpp"

namespace subnetsim {

struct CadicParams {
  double k0 = 0.49;              // logistic growth rate
  double k1 = 16.0;              // logistic midpoint
  std::vector<double> z{100.0, 186.0};  // sub-band count thresholds, strictly increasing
  double p_max = 1e-3;           // W
  std::optional<double> gate_dbm;  // no-transmit threshold (modified variant)

  int subbands() const { return static_cast<int>(z.size()) + 1; }

  void validate() const {
    if (!(k0 >= 0.0)) throw std::invalid_argument("CadicParams: k0 must be >= 0");
    for (std::size_t i = 1; i < z.size(); ++i)
      if (!(z[i] > z[i - 1])) throw std::invalid_argument("CadicParams: thresholds must be strictly increasing");
  }
};

/// Logistic transmit power p_max / (1 + exp(-k0 (chi - k1))).
inline double cadic_power(double chi, const CadicParams& p) {
  return p.p_max / (1.0 + std::exp(-p.k0 * (chi - p.k1)));
}

/// Cumulative per-sub-band mean of the UL interference-plus-noise measurements.
class InterferenceAverager {
 public:
  explicit InterferenceAverager(int subbands = 3) : mean_(static_cast<std::size_t>(subbands), 0.0) {}

  void update(const RssiReport& r) {
    ++count_;
    const double inv = 1.0 / static_cast<double>(count_);
    for (std::size_t l = 0; l < mean_.size(); ++l) mean_[l] += (r.per_subband[l] - mean_[l]) * inv;
  }

  const std::vector<double>& mean() const { return mean_; }
  long count() const { return count_; }
  bool empty() const { return count_ == 0; }

 private:
  std::vector<double> mean_;
  long count_ = 0;
};

inline void update_average(InterferenceAverager& avg, const RssiReport& r) { avg.update(r); }

/// Sub-band indices by ascending average interference, ties to the lower index.
inline std::vector<int> rank_subbands(std::span<const double> averages) {
  std::vector<int> order(averages.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return averages[static_cast<std::size_t>(a)] < averages[static_cast<std::size_t>(b)]; });
  return order;
}

inline std::vector<int> rank_subbands(const InterferenceAverager& avg) { return rank_subbands(avg.mean()); }

/// Piecewise-constant sub-band count: 1 below z_1, j on [z_{j-1}, z_j), L from z_{L-1}.
inline int num_subbands(double chi, const CadicParams& p) {
  int count = 1;
  for (double threshold : p.z)
    if (chi >= threshold) ++count;
  return count;
}

inline SubbandMask select_subbands(double chi, std::span<const double> averages, const CadicParams& p) {
  const int L = static_cast<int>(averages.size());
  const int count = std::min(num_subbands(chi, p), L);
  const auto order = rank_subbands(averages);
  SubbandMask mask(L);
  for (int i = 0; i < count; ++i) mask.set(order[static_cast<std::size_t>(i)]);
  return mask;
}

/// Full CADIC decision from subnetwork-local inputs only. Before the first RSSI
/// sample the subnetwork stays on `initial_subband`.
inline AllocationDecision cadic_decide(double chi, const InterferenceAverager& avg, const CadicParams& p,
                                       int initial_subband) {
  AllocationDecision d;
  d.power_total = cadic_power(chi, p);
  const int L = static_cast<int>(avg.mean().size());
  if (avg.empty())
    d.subbands = SubbandMask::single(L, initial_subband);
  else
    d.subbands = select_subbands(chi, avg.mean(), p);
  d.transmit = !(p.gate_dbm && w_to_dbm(d.power_total) < *p.gate_dbm);
  return d;
}

}  // namespace subnetsim
