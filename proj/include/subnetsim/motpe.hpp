#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "config.hpp"
#include "rng.hpp"

namespace subnetsim {

using Objectives = std::vector<double>;

/// True iff a <= b component-wise with at least one strict improvement (minimisation).
inline bool dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dominates: dimension mismatch");
  bool strict = false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j] > b[j]) return false;
    if (a[j] < b[j]) strict = true;
  }
  return strict;
}

/// Indices of the non-dominated points, in input order.
inline std::vector<std::size_t> pareto_front(const std::vector<Objectives>& f) {
  if (f.empty()) throw std::invalid_argument("pareto_front: no observations");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < f.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < f.size() && !dominated; ++j) dominated = j != i && dominates(f[j], f[i]);
    if (!dominated) out.push_back(i);
  }
  return out;
}

/// Fronts of the non-dominated sorting, each in input order.
inline std::vector<std::vector<std::size_t>> nondominated_sort(const std::vector<Objectives>& f) {
  const std::size_t n = f.size();
  std::vector<int> dominated_by(n, 0);
  std::vector<std::vector<std::size_t>> dominates_list(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (dominates(f[i], f[j]))
        dominates_list[i].push_back(j);
      else if (dominates(f[j], f[i]))
        ++dominated_by[i];
    }
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < n; ++i)
    if (dominated_by[i] == 0) current.push_back(i);
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t i : current)
      for (std::size_t j : dominates_list[i])
        if (--dominated_by[j] == 0) next.push_back(j);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

namespace detail {

// Recursive slicing along the last objective.
inline double hypervolume_rec(std::vector<Objectives> pts, std::span<const double> ref) {
  const std::size_t d = ref.size();
  std::erase_if(pts, [&](const Objectives& p) {
    for (std::size_t j = 0; j < d; ++j)
      if (!(p[j] < ref[j])) return true;
    return false;
  });
  if (pts.empty()) return 0.0;
  if (d == 1) {
    double best = ref[0];
    for (const auto& p : pts) best = std::min(best, p[0]);
    return ref[0] - best;
  }
  if (d == 2) {
    std::sort(pts.begin(), pts.end(), [](const Objectives& a, const Objectives& b) {
      return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
    });
    double volume = 0.0, floor = ref[1];
    for (const auto& p : pts) {
      if (p[1] >= floor) continue;
      volume += (ref[0] - p[0]) * (floor - p[1]);
      floor = p[1];
    }
    return volume;
  }
  std::sort(pts.begin(), pts.end(), [d](const Objectives& a, const Objectives& b) { return a[d - 1] < b[d - 1]; });
  const std::span<const double> sub_ref = ref.first(d - 1);
  double volume = 0.0;
  std::vector<Objectives> slice;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    slice.emplace_back(pts[i].begin(), pts[i].end() - 1);
    const double top = i + 1 < pts.size() ? pts[i + 1][d - 1] : ref[d - 1];
    if (top > pts[i][d - 1]) volume += (top - pts[i][d - 1]) * hypervolume_rec(slice, sub_ref);
  }
  return volume;
}

}  // namespace detail

/// Volume dominated by `points` and bounded by `ref` (minimisation).
inline double hypervolume(const std::vector<Objectives>& points, std::span<const double> ref) {
  for (const auto& p : points)
    if (p.size() != ref.size()) throw std::invalid_argument("hypervolume: dimension mismatch");
  return detail::hypervolume_rec(points, ref);
}

/// Component-wise max over all points, pushed out by 10%.
inline Objectives reference_point(const std::vector<Objectives>& f) {
  Objectives ref(f.front());
  for (const auto& p : f)
    for (std::size_t j = 0; j < ref.size(); ++j) ref[j] = std::max(ref[j], p[j]);
  for (double& r : ref) r += r != 0.0 ? 0.1 * std::abs(r) : 1e-12;
  return ref;
}

/// Greedily picks `k` members of `candidates`, each maximising the hypervolume gained over
/// the points picked before it. Ties go to the earlier candidate.
inline std::vector<std::size_t> greedy_hypervolume_subset(const std::vector<Objectives>& f,
                                                          std::vector<std::size_t> candidates, std::size_t k,
                                                          std::span<const double> ref) {
  std::vector<std::size_t> picked;
  std::vector<Objectives> selected;
  double base = 0.0;
  while (picked.size() < k && !candidates.empty()) {
    std::size_t best = 0;
    double best_gain = -1.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      selected.push_back(f[candidates[c]]);
      const double gain = hypervolume(selected, ref) - base;
      selected.pop_back();
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    selected.push_back(f[candidates[best]]);
    base = hypervolume(selected, ref);
    picked.push_back(candidates[best]);
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return picked;
}

struct ObservationSplit {
  std::vector<std::size_t> good;
  std::vector<std::size_t> bad;
};

/// good = best ceil(gamma |O|) by non-dominated rank; the boundary front is cut by
/// greedy hypervolume contribution against reference_point(O).
inline ObservationSplit split_observations(const std::vector<Objectives>& f, double gamma) {
  if (f.size() < 2) throw std::invalid_argument("split_observations: need at least two observations");
  const auto n_good = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(f.size()) - 1e-12));
  const Objectives ref = reference_point(f);
  ObservationSplit s;
  std::vector<std::uint8_t> is_good(f.size(), 0);
  for (const auto& front : nondominated_sort(f)) {
    const std::size_t room = n_good - s.good.size();
    if (room == 0) break;
    const auto take = front.size() <= room ? front : greedy_hypervolume_subset(f, front, room, ref);
    for (std::size_t i : take) {
      s.good.push_back(i);
      is_good[i] = 1;
    }
  }
  for (std::size_t i = 0; i < f.size(); ++i)
    if (!is_good[i]) s.bad.push_back(i);
  return s;
}

namespace detail {

// Upper normal tail Q(x), accurate deep into both tails.
inline double upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

// P(a < Z < b) for standard normal Z, without cancellation in either tail.
inline double normal_mass(double a, double b) {
  if (a >= b) return 0.0;
  if (a >= 0.0) return upper_tail(a) - upper_tail(b);
  if (b <= 0.0) return upper_tail(-b) - upper_tail(-a);
  return 1.0 - upper_tail(b) - upper_tail(-a);
}

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace detail

/// One-dimensional Parzen estimator: equally weighted Gaussian kernels, each truncated
/// to the evaluation interval, plus a broad prior kernel at the midpoint of the bounds.
class ParzenEstimator {
 public:
  ParzenEstimator() = default;

  /// Bandwidth of a kernel is the larger gap to its sorted neighbours (bounds act as
  /// neighbours at the ends), clamped to [1%, 100%] of the range. The prior kernel's
  /// bandwidth is the full range.
  static ParzenEstimator fit(std::span<const double> values, double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("ParzenEstimator: empty bounds");
    ParzenEstimator p;
    p.lo_ = lo;
    p.hi_ = hi;
    const double range = hi - lo;
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const double left = sorted[i] - (i == 0 ? lo : sorted[i - 1]);
      const double right = (i + 1 == sorted.size() ? hi : sorted[i + 1]) - sorted[i];
      p.mu_.push_back(sorted[i]);
      p.sigma_.push_back(std::clamp(std::max(left, right), 0.01 * range, range));
    }
    p.mu_.push_back(0.5 * (lo + hi));
    p.sigma_.push_back(range);
    return p;
  }

  std::size_t kernels() const { return mu_.size(); }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  std::span<const double> centers() const { return mu_; }
  std::span<const double> bandwidths() const { return sigma_; }

  /// Log density on the interval [a, b].
  double log_pdf(double x, double a, double b) const {
    if (x < a || x > b) return -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(mu_.size());
    const double log_w = -std::log(static_cast<double>(mu_.size()));
    for (std::size_t i = 0; i < mu_.size(); ++i) {
      const double mass = detail::normal_mass((a - mu_[i]) / sigma_[i], (b - mu_[i]) / sigma_[i]);
      if (!(mass > 0.0)) continue;
      const double z = (x - mu_[i]) / sigma_[i];
      terms.push_back(log_w - 0.5 * z * z - std::log(sigma_[i] * std::sqrt(2.0 * std::numbers::pi) * mass));
    }
    return detail::log_sum_exp(terms);
  }
  double log_pdf(double x) const { return log_pdf(x, lo_, hi_); }

  /// Draw on [a, b]: a uniformly chosen kernel, then inverse-CDF sampling of its truncation.
  double sample(Engine& rng, double a, double b) const {
    const std::size_t i = uniform_index(rng, mu_.size());
    const double za = (a - mu_[i]) / sigma_[i];
    const double zb = (b - mu_[i]) / sigma_[i];
    const double u = uniform01(rng);
    double z;
    // Inverse CDF in the tail nearer the interval.
    if (za >= 0.0) {
      const double qa = detail::upper_tail(za), qb = detail::upper_tail(zb);
      const double q = qa - u * (qa - qb);
      z = q > 0.0 ? std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q) : za;
    } else {
      const double pa = detail::upper_tail(-za), pb = detail::upper_tail(-zb);
      const double p = pa + u * (pb - pa);
      z = p > 0.0 ? -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p) : za;
    }
    if (!std::isfinite(z)) z = za;
    return std::clamp(mu_[i] + sigma_[i] * z, a, b);
  }
  double sample(Engine& rng) const { return sample(rng, lo_, hi_); }

 private:
  std::vector<double> mu_, sigma_;
  double lo_ = 0.0, hi_ = 1.0;
};

inline ParzenEstimator fit_kde(std::span<const double> values, double lo, double hi) {
  return ParzenEstimator::fit(values, lo, hi);
}

/// Box-bounded dimensions where a dimension's lower bound may instead be the value of an
/// earlier dimension (exclusive).
struct SearchDimension {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  int lower_from = -1;         // index of the dimension whose value is the (exclusive) lower bound
  bool lower_exclusive = false;
};

struct SearchSpace {
  std::vector<SearchDimension> dims;

  /// k0 in [0, k0_max]; k1 in (0, k1_max]; z_1 in (k1, z_max_1]; z_j in (z_{j-1}, z_max_j].
  static SearchSpace cadic(const TuningConfig& t) {
    SearchSpace s;
    s.dims.push_back({"k0", 0.0, t.k0_upper, -1, false});
    s.dims.push_back({"k1", 0.0, t.k1_upper, -1, true});
    for (std::size_t j = 0; j < t.z_upper.size(); ++j)
      s.dims.push_back({"z" + std::to_string(j + 1), 0.0, t.z_upper[j], static_cast<int>(j + 1), true});
    return s;
  }

  std::size_t size() const { return dims.size(); }

  /// Lower bound of dimension d given the values already drawn for dimensions < d.
  double lower(std::size_t d, std::span<const double> y) const {
    const auto& dim = dims[d];
    return dim.lower_from >= 0 ? y[static_cast<std::size_t>(dim.lower_from)] : dim.lo;
  }
  double upper(std::size_t d) const { return dims[d].hi; }
  /// Unconditional range used to fit the estimators.
  double global_lower(std::size_t d) const {
    const auto& dim = dims[d];
    return dim.lower_from >= 0 ? global_lower(static_cast<std::size_t>(dim.lower_from)) : dim.lo;
  }

  bool feasible(std::span<const double> y) const {
    if (y.size() != dims.size()) return false;
    for (std::size_t d = 0; d < dims.size(); ++d) {
      const double a = lower(d, y);
      const bool exclusive = dims[d].lower_exclusive || dims[d].lower_from >= 0;
      if (!std::isfinite(y[d]) || y[d] > dims[d].hi || y[d] < a || (exclusive && y[d] == a)) return false;
    }
    return true;
  }

  /// Uniform draw, dimension by dimension, on (lower, upper] (or [lo, hi] for closed dimensions).
  std::vector<double> sample_uniform(Engine& rng) const {
    for (int attempt = 0;; ++attempt) {
      std::vector<double> y(dims.size());
      for (std::size_t d = 0; d < dims.size(); ++d) {
        const double a = lower(d, y), b = upper(d);
        const double u = uniform01(rng);
        y[d] = dims[d].lower_exclusive || dims[d].lower_from >= 0 ? b - (b - a) * u : a + (b - a) * u;
      }
      if (feasible(y) || attempt >= 100) return clamp(std::move(y));
    }
  }

  /// Pushes a point into the feasible region, dimension by dimension.
  std::vector<double> clamp(std::vector<double> y) const {
    for (std::size_t d = 0; d < dims.size(); ++d) {
      const double a = lower(d, y), b = upper(d);
      const bool exclusive = dims[d].lower_exclusive || dims[d].lower_from >= 0;
      y[d] = std::clamp(y[d], a, std::max(a, b));
      if (exclusive && y[d] <= a) y[d] = std::nextafter(a, std::numeric_limits<double>::infinity());
    }
    return y;
  }
};

struct TpeModel {
  std::vector<ParzenEstimator> good;  // l(y), one per dimension
  std::vector<ParzenEstimator> bad;   // g(y)
};

inline TpeModel fit_tpe(const SearchSpace& space, const std::vector<std::vector<double>>& y,
                        const ObservationSplit& split) {
  TpeModel m;
  for (std::size_t d = 0; d < space.size(); ++d) {
    std::vector<double> gv, bv;
    for (std::size_t i : split.good) gv.push_back(y[i][d]);
    for (std::size_t i : split.bad) bv.push_back(y[i][d]);
    const double lo = space.global_lower(d), hi = space.upper(d);
    m.good.push_back(ParzenEstimator::fit(gv, lo, hi));
    m.bad.push_back(ParzenEstimator::fit(bv, lo, hi));
  }
  return m;
}

/// sum_d log l_d(y_d) - log g_d(y_d), each density truncated to y's conditional bounds.
inline double acquisition(const SearchSpace& space, const TpeModel& m, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t d = 0; d < space.size(); ++d) {
    const double a = space.lower(d, y), b = space.upper(d);
    s += m.good[d].log_pdf(y[d], a, b) - m.bad[d].log_pdf(y[d], a, b);
  }
  return s;
}

/// Draws one candidate from l(y), conditioning each dimension on the earlier draws.
inline std::vector<double> sample_candidate(const SearchSpace& space, const TpeModel& m, Engine& rng) {
  std::vector<double> y(space.size());
  for (int attempt = 0; attempt < 100; ++attempt) {
    bool ok = true;
    for (std::size_t d = 0; d < space.size() && ok; ++d) {
      const double a = space.lower(d, y), b = space.upper(d);
      if (!(b > a)) {
        ok = false;
        break;
      }
      y[d] = m.good[d].sample(rng, a, b);
    }
    if (ok && space.feasible(y)) return y;
  }
  return space.clamp(std::move(y));
}

/// Best of `candidates` draws from l(y) under the l/g ratio. Ties go to the earlier draw.
inline std::vector<double> propose(const SearchSpace& space, const std::vector<std::vector<double>>& y,
                                   const std::vector<Objectives>& f, double gamma, int candidates, Engine& rng) {
  const TpeModel m = fit_tpe(space, y, split_observations(f, gamma));
  std::vector<double> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < candidates; ++c) {
    auto cand = sample_candidate(space, m, rng);
    const double score = acquisition(space, m, cand);
    if (best.empty() || score > best_score) {
      best_score = score;
      best = std::move(cand);
    }
  }
  return best;
}

struct Observation {
  int trial = 0;
  std::vector<double> y;
  Objectives f;
  double wall_seconds = 0.0;
  bool startup = false;
};

struct TuneSettings {
  int trials = 400;
  int startup = 100;
  double gamma = 0.1;
  int candidates = 24;
};

struct TuneResult {
  std::vector<Observation> observations;
  std::vector<std::size_t> pareto;  // indices into observations
  std::size_t selected = 0;
  std::string selection_rule =
      "min over the Pareto set of the sum of objectives min-max normalised over the Pareto set; ties to the "
      "earliest trial";
};

/// Pareto member minimising the sum of min-max-normalised objectives.
inline std::size_t select_balanced(const std::vector<Objectives>& f, std::span<const std::size_t> members) {
  if (members.empty()) throw std::invalid_argument("select_balanced: empty set");
  const std::size_t m = f[members.front()].size();
  Objectives lo(m, std::numeric_limits<double>::infinity()), hi(m, -std::numeric_limits<double>::infinity());
  for (std::size_t i : members)
    for (std::size_t j = 0; j < m; ++j) {
      lo[j] = std::min(lo[j], f[i][j]);
      hi[j] = std::max(hi[j], f[i][j]);
    }
  std::size_t best = members.front();
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i : members) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += hi[j] > lo[j] ? (f[i][j] - lo[j]) / (hi[j] - lo[j]) : 0.0;
    if (s < best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

using Objective = std::function<Objectives(std::span<const double> y, int trial)>;

/// Sequential model-based optimisation: `startup` uniform trials, then MOTPE proposals.
inline TuneResult tune(const SearchSpace& space, const Objective& objective, const TuneSettings& s, Engine& rng) {
  if (s.trials < 1) throw std::invalid_argument("tune: trials must be >= 1");
  TuneResult res;
  std::vector<std::vector<double>> ys;
  std::vector<Objectives> fs;
  for (int t = 0; t < s.trials; ++t) {
    const bool startup = t < std::max(s.startup, 2);
    std::vector<double> y = startup ? space.sample_uniform(rng) : propose(space, ys, fs, s.gamma, s.candidates, rng);
    const auto t0 = std::chrono::steady_clock::now();
    Objectives f = objective(y, t);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ys.push_back(y);
    fs.push_back(f);
    res.observations.push_back({t, std::move(y), std::move(f), wall, startup});
  }
  res.pareto = pareto_front(fs);
  res.selected = select_balanced(fs, res.pareto);
  return res;
}

}  // namespace subnetsim
